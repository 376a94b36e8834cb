"""Command-line entry points: ``run`` for configured experiments, ``preset``
for the canned studies.

Exit codes: 0 success, 2 configuration problems, 3 bad data or numerics,
4 file I/O.  Messages go to stderr tagged with the failure category.  The
output root defaults to ./runs and can be moved with the PFEDSIM_OUT
environment variable; --out always wins.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig, override_config, parse_config
from .errors import ConfigError, DegenerateInputError, ShapeError
from .federation import ALGORITHMS
from .presets import PRESETS, output_root, run_preset
from .reporting import write_report
from .runner import run_single


def _add_override_flags(parser: argparse.ArgumentParser, with_algo: bool) -> None:
    if with_algo:
        parser.add_argument("--algo", choices=ALGORITHMS, default=None)
    parser.add_argument("--rho", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--rounds", type=int, default=None)
    parser.add_argument("--join-ratio", type=float, default=None)
    parser.add_argument("--local-epochs", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfedsim",
        description="Deterministic federated-learning simulator on synthetic blobs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("--config", default=None, help="JSON config path (defaults apply)")
    run_p.add_argument("--seed", type=int, default=None, help="replace the seed list")
    run_p.add_argument("--out", default=None, help="output directory")
    _add_override_flags(run_p, with_algo=True)

    preset_p = sub.add_parser("preset", help="run a canned study")
    preset_p.add_argument("name", help=f"one of: {', '.join(sorted(PRESETS))}")
    preset_p.add_argument("--seed", type=int, default=0, help="base seed")
    preset_p.add_argument("--out", default=None, help="output directory")
    _add_override_flags(preset_p, with_algo=False)

    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "rho": args.rho,
        "alpha": args.alpha,
        "rounds": args.rounds,
        "join_ratio": args.join_ratio,
        "local_epochs": args.local_epochs,
    }


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config is None:
        config = ExperimentConfig()
    else:
        try:
            with open(args.config, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        config = parse_config(text)
    config = override_config(config, algorithm=args.algo, **_overrides(args))
    if args.seed is not None:
        config = override_config(config, seeds=(args.seed,))
    out_dir = args.out or config.output_dir or os.path.join(output_root(), "run")
    for seed in config.seeds:
        report = run_single(config, seed)
        seed_dir = os.path.join(out_dir, f"seed-{seed}")
        write_report(report, seed_dir)
        print(
            f"{config.algorithm} seed {seed}: "
            f"final mean accuracy {report.final_accuracies.mean():.4f} -> {seed_dir}"
        )
    return 0


def _cmd_preset(args: argparse.Namespace) -> int:
    result = run_preset(args.name, seed=args.seed, out_dir=args.out, overrides=_overrides(args))
    print(f"preset {result.name}: {len(result.paths)} files -> {result.out_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_preset(args)
    except ConfigError as exc:
        print(f"pfedsim: config error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateInputError, ShapeError, ValueError) as exc:
        print(f"pfedsim: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"pfedsim: io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
