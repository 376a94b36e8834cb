"""Canned experiments: measurement studies and benchmark tables.

Each preset owns an output directory, writes deterministic CSVs, and returns
a PresetResult whose ``data`` dict carries the same values in memory so
callers can assert on them without re-parsing files.  Presets taking a seed
argument treat it as the base of a five-seed block (seed, seed+1, ...,
seed+4) except comm-audit, which is a single-seed accounting exercise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import nn
from .config import SHARD, ExperimentConfig, PartitionConfig, override_config
from .data import ClientSplit, LabeledDataset, data_similarity
from .errors import ConfigError
from .federation import FEDAVG, FEDPER, LOCAL_ONLY, PFEDSIM
from .reporting import write_report, write_table
from .rng import stream
from .runner import build_partitioned_data, run_single
from .similarity import (
    classifier_similarity_plain,
    cosine,
    ldb_similarity,
    linear_cka,
    mdb_similarity,
)

SEEDS_PER_PRESET = 5
STUDY_EPOCHS = 30
PROBE_SIZE = 256
RHO_GRID = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
MAIN_ALGORITHMS = (LOCAL_ONLY, FEDAVG, FEDPER, PFEDSIM)

# Four clients with deliberately overlapping label sets: two identical ones,
# a partial overlap on either side, and one fully disjoint pair.
SHARD_LAYOUT = (
    (0, 1, 2, 3, 4),
    (0, 1, 2, 3, 4),
    (2, 3, 4, 5, 6),
    (5, 6, 7, 8, 9),
)
# (label, a, b): identical twins, one-sided overlaps, and the disjoint pair.
CANONICAL_PAIRS = (("ii", 0, 1), ("ij", 0, 2), ("jk", 2, 3), ("ik", 0, 3))
ALL_PAIRS = tuple((a, b) for a in range(4) for b in range(a + 1, 4))


@dataclass
class PresetResult:
    name: str
    out_dir: str
    paths: list[str] = field(default_factory=list)
    data: dict[str, Any] = field(default_factory=dict)


def output_root() -> str:
    """Output root directory; overridable through one environment variable."""
    return os.environ.get("PFEDSIM_OUT", "runs")


def _apply(config: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    return override_config(config, **overrides) if overrides else config


def _seed_block(base: int) -> list[int]:
    return [base + k for k in range(SEEDS_PER_PRESET)]


def _full_share(split: ClientSplit) -> LabeledDataset:
    """A client's whole local dataset (train and test halves pooled)."""
    return LabeledDataset(
        np.vstack([split.train.x, split.test.x]),
        np.concatenate([split.train.y, split.test.y]),
    )


def _train_study_models(
    config: ExperimentConfig, seed: int, epochs: int = STUDY_EPOCHS
):
    """Shared-init independent training, one model per client.

    All models start from the same Glorot draw, so differences between them
    reflect only the data each client saw.
    """
    source, partitioned = build_partitioned_data(config, seed)
    init = nn.init_mlp(
        config.dataset.dim, config.hidden, config.dataset.classes, stream(seed, "init")
    )
    models = []
    for i, split in enumerate(partitioned.clients):
        rng = stream(seed, "client", i, 0)
        models.append(
            nn.local_train(
                init,
                split.train.x,
                split.train.y,
                epochs=epochs,
                batch_size=config.batch_size,
                lr=config.lr,
                rng=rng,
            )
        )
    return source, partitioned, init, models


def _shard_config(overrides: dict[str, Any]) -> ExperimentConfig:
    config = ExperimentConfig(
        n_clients=len(SHARD_LAYOUT),
        partition=PartitionConfig(mode=SHARD, shards=SHARD_LAYOUT),
    )
    return _apply(config, overrides)


def preset_cka_layers(seed: int, out_dir: str, overrides: dict[str, Any]) -> PresetResult:
    """Train ten models on a skewed partition; compare layers by pairwise CKA.

    Writes one 10x10 CKA matrix per layer per seed plus a summary of mean
    off-diagonal CKA, the quantity that shows how sharply each layer
    separates models trained on different data.
    """
    config = _apply(ExperimentConfig(n_clients=10), overrides)
    result = PresetResult("cka-layers", out_dir)
    summary_rows = []
    mean_offdiag: dict[tuple[int, int], float] = {}
    n_layers = len(config.hidden) + 1
    for s in _seed_block(seed):
        source, _, _, models = _train_study_models(config, s)
        probe_rng = stream(s, "probe")
        take = probe_rng.choice(
            len(source), size=min(PROBE_SIZE, len(source)), replace=False
        )
        probe = source.x[take]
        acts = [nn.forward(model, probe)[1] for model in models]
        n = len(models)
        seed_dir = os.path.join(out_dir, f"seed-{s}")
        for layer in range(n_layers):
            matrix = np.eye(n)
            for i in range(n):
                for j in range(i + 1, n):
                    value = linear_cka(acts[i][layer], acts[j][layer])
                    matrix[i, j] = value
                    matrix[j, i] = value
            path = os.path.join(seed_dir, f"cka_layer{layer}.csv")
            os.makedirs(seed_dir, exist_ok=True)
            write_table(
                path,
                ["model"] + [str(j) for j in range(n)],
                ([i] + [matrix[i, j] for j in range(n)] for i in range(n)),
            )
            result.paths.append(path)
            off = float((matrix.sum() - np.trace(matrix)) / (n * n - n))
            mean_offdiag[(s, layer)] = off
            summary_rows.append((s, layer, off))
    summary_path = os.path.join(out_dir, "summary.csv")
    write_table(summary_path, ("seed", "layer", "mean_offdiag_cka"), summary_rows)
    result.paths.append(summary_path)
    result.data = {
        "mean_offdiag": mean_offdiag,
        "n_layers": n_layers,
        "seeds": _seed_block(seed),
    }
    return result


def preset_shard_similarity(
    seed: int, out_dir: str, overrides: dict[str, Any]
) -> PresetResult:
    """Four-shard study: does classifier similarity track label overlap?

    Trains four shared-init models on the overlapping shard layout, writes
    pairwise classifier similarities, per-class boundary cosines, and a
    per-seed flag for the strict ordering ii > ij > jk > ik.
    """
    config = _shard_config(overrides)
    result = PresetResult("shard-similarity", out_dir)
    summary_rows = []
    orderings: dict[int, bool] = {}
    sims: dict[int, dict[str, float]] = {}
    for s in _seed_block(seed):
        _, partitioned, _, models = _train_study_models(config, s)
        bounds = [nn.decision_boundaries(m.classifier) for m in models]
        shares = [_full_share(split) for split in partitioned.clients]
        seed_dir = os.path.join(out_dir, f"seed-{s}")
        os.makedirs(seed_dir, exist_ok=True)

        pair_rows = []
        class_rows = []
        for a, b in ALL_PAIRS:
            pair_rows.append(
                (
                    a,
                    b,
                    data_similarity(shares[a], shares[b]),
                    classifier_similarity_plain(bounds[a], bounds[b], config.epsilon),
                )
            )
            for c in range(config.dataset.classes):
                class_rows.append(
                    (a, b, c, cosine(bounds[a][c], bounds[b][c], config.epsilon))
                )
        pairs_path = os.path.join(seed_dir, "pairs.csv")
        write_table(
            pairs_path,
            ("client_a", "client_b", "data_similarity", "classifier_similarity"),
            pair_rows,
        )
        classes_path = os.path.join(seed_dir, "boundary_classes.csv")
        write_table(
            classes_path, ("client_a", "client_b", "class", "cosine"), class_rows
        )
        result.paths.extend([pairs_path, classes_path])

        values = {
            label: classifier_similarity_plain(bounds[a], bounds[b], config.epsilon)
            for label, a, b in CANONICAL_PAIRS
        }
        strict = (
            values["ii"] > values["ij"] > values["jk"] > values["ik"]
        )
        orderings[s] = bool(strict)
        sims[s] = values
        summary_rows.append(
            (s, values["ii"], values["ij"], values["jk"], values["ik"], int(strict))
        )
    summary_path = os.path.join(out_dir, "summary.csv")
    write_table(
        summary_path,
        ("seed", "sim_ii", "sim_ij", "sim_jk", "sim_ik", "strict_ordering"),
        summary_rows,
    )
    result.paths.append(summary_path)
    result.data = {"orderings": orderings, "sims": sims, "seeds": _seed_block(seed)}
    return result


def preset_metric_compare(
    seed: int, out_dir: str, overrides: dict[str, Any]
) -> PresetResult:
    """Rank four similarity metrics against data similarity on the shard pairs.

    For each canonical pair: data similarity, parameter-delta cosine (MDB),
    symmetrized evaluation-loss difference (LDB), and plain classifier
    similarity (CS), with Spearman rank correlations against the data
    column, per seed and on the seed-averaged table.
    """
    config = _shard_config(overrides)
    result = PresetResult("metric-compare", out_dir)
    columns = ("data_similarity", "mdb", "ldb", "cs")
    per_pair: dict[str, dict[str, list[float]]] = {
        label: {col: [] for col in columns} for label, _, _ in CANONICAL_PAIRS
    }
    per_seed_spearman: dict[int, dict[str, float]] = {}
    for s in _seed_block(seed):
        _, partitioned, init, models = _train_study_models(config, s)
        bounds = [nn.decision_boundaries(m.classifier) for m in models]
        shares = [_full_share(split) for split in partitioned.clients]
        init_flat = nn.flatten_params(init)
        deltas = [nn.flatten_params(m) - init_flat for m in models]

        rows = []
        for label, a, b in CANONICAL_PAIRS:
            ldb_ab = ldb_similarity(models[a], models[b], partitioned.clients[a].test)
            ldb_ba = ldb_similarity(models[b], models[a], partitioned.clients[b].test)
            row = {
                "data_similarity": data_similarity(shares[a], shares[b]),
                "mdb": mdb_similarity(deltas[a], deltas[b]),
                "ldb": 0.5 * (ldb_ab + ldb_ba),
                "cs": classifier_similarity_plain(bounds[a], bounds[b], config.epsilon),
            }
            rows.append((label, a, b, row))
            for col in columns:
                per_pair[label][col].append(row[col])

        seed_dir = os.path.join(out_dir, f"seed-{s}")
        os.makedirs(seed_dir, exist_ok=True)
        table_path = os.path.join(seed_dir, "table.csv")
        write_table(
            table_path,
            ("pair", "client_a", "client_b") + columns,
            ((label, a, b) + tuple(row[col] for col in columns) for label, a, b, row in rows),
        )
        data_col = [row["data_similarity"] for _, _, _, row in rows]
        spear = {
            metric: float(stats.spearmanr(data_col, [row[metric] for _, _, _, row in rows])[0])
            for metric in ("mdb", "ldb", "cs")
        }
        per_seed_spearman[s] = spear
        corr_path = os.path.join(seed_dir, "correlations.csv")
        write_table(
            corr_path, ("metric", "spearman"), sorted(spear.items())
        )
        result.paths.extend([table_path, corr_path])

    mean_table = {
        label: {col: float(np.mean(values[col])) for col in columns}
        for label, values in per_pair.items()
    }
    summary_path = os.path.join(out_dir, "summary.csv")
    write_table(
        summary_path,
        ("pair", "client_a", "client_b") + columns,
        (
            (label, a, b) + tuple(mean_table[label][col] for col in columns)
            for label, a, b in CANONICAL_PAIRS
        ),
    )
    data_col = [mean_table[label]["data_similarity"] for label, _, _ in CANONICAL_PAIRS]
    spearman = {
        metric: float(
            stats.spearmanr(
                data_col, [mean_table[label][metric] for label, _, _ in CANONICAL_PAIRS]
            )[0]
        )
        for metric in ("mdb", "ldb", "cs")
    }
    corr_path = os.path.join(out_dir, "correlations.csv")
    write_table(corr_path, ("metric", "spearman"), sorted(spearman.items()))
    result.paths.extend([summary_path, corr_path])
    result.data = {
        "mean_table": mean_table,
        "spearman": spearman,
        "per_seed_spearman": per_seed_spearman,
        "seeds": _seed_block(seed),
    }
    return result


def _formatted(mean: float, std: float) -> str:
    """Percent rendering like 67.31(1.25)."""
    return f"{mean * 100.0:.2f}({std * 100.0:.2f})"


def preset_main_table(seed: int, out_dir: str, overrides: dict[str, Any]) -> PresetResult:
    """All four algorithms on shared partitions over a five-seed block."""
    config = _apply(ExperimentConfig(), overrides)
    result = PresetResult("main-table", out_dir)
    reports = {}
    per_seed: dict[tuple[str, int], float] = {}
    for s in _seed_block(seed):
        for algo in MAIN_ALGORITHMS:
            report = run_single(config, s, algorithm=algo)
            reports[(algo, s)] = report
            per_seed[(algo, s)] = float(report.final_accuracies.mean())
            result.paths.extend(
                write_report(report, os.path.join(out_dir, f"seed-{s}", algo))
            )
    summary: dict[str, tuple[float, float]] = {}
    summary_rows = []
    for algo in MAIN_ALGORITHMS:
        finals = [per_seed[(algo, s)] for s in _seed_block(seed)]
        mean, std = float(np.mean(finals)), float(np.std(finals))
        summary[algo] = (mean, std)
        summary_rows.append((algo, mean, std, _formatted(mean, std)))
    summary_path = os.path.join(out_dir, "summary.csv")
    write_table(summary_path, ("algo", "mean_acc", "std_acc", "formatted"), summary_rows)
    result.paths.append(summary_path)
    result.data = {
        "summary": summary,
        "per_seed": per_seed,
        "reports": reports,
        "seeds": _seed_block(seed),
    }
    return result


def preset_rho_sweep(seed: int, out_dir: str, overrides: dict[str, Any]) -> PresetResult:
    """Personalized algorithm across the generalization-ratio grid."""
    base = _apply(ExperimentConfig(), overrides)
    result = PresetResult("rho-sweep", out_dir)
    per_seed: dict[tuple[float, int], float] = {}
    summary: dict[float, tuple[float, float]] = {}
    per_seed_rows = []
    summary_rows = []
    for rho in RHO_GRID:
        config = override_config(base, rho=rho)
        finals = []
        for s in _seed_block(seed):
            report = run_single(config, s, algorithm=PFEDSIM)
            acc = float(report.final_accuracies.mean())
            finals.append(acc)
            per_seed[(rho, s)] = acc
            per_seed_rows.append((rho, s, acc))
        mean, std = float(np.mean(finals)), float(np.std(finals))
        summary[rho] = (mean, std)
        summary_rows.append((rho, mean, std, _formatted(mean, std)))
    per_seed_path = os.path.join(out_dir, "per_seed.csv")
    os.makedirs(out_dir, exist_ok=True)
    write_table(per_seed_path, ("rho", "seed", "final_mean_acc"), per_seed_rows)
    summary_path = os.path.join(out_dir, "summary.csv")
    write_table(summary_path, ("rho", "mean_acc", "std_acc", "formatted"), summary_rows)
    result.paths.extend([per_seed_path, summary_path])
    result.data = {"summary": summary, "per_seed": per_seed, "seeds": _seed_block(seed)}
    return result


def preset_comm_audit(seed: int, out_dir: str, overrides: dict[str, Any]) -> PresetResult:
    """Exact per-round parameter-transfer counts for every algorithm.

    Ten rounds and one seed are enough: the counts are structural, not
    statistical.
    """
    config = _apply(ExperimentConfig(rounds=10), overrides)
    result = PresetResult("comm-audit", out_dir)
    model = nn.init_mlp(
        config.dataset.dim, config.hidden, config.dataset.classes, stream(seed, "init")
    )
    nu_m = model.num_params
    nu_omega = sum(layer.num_params for layer in model.extractor)
    reports = {}
    transfer_rows = []
    summary_rows = []
    for algo in MAIN_ALGORITHMS:
        report = run_single(config, seed, algorithm=algo)
        reports[algo] = report
        total_up = total_down = 0
        for row, parts in zip(report.rounds, report.participants):
            per_part = row.uploaded // len(parts)
            transfer_rows.append(
                (
                    algo,
                    row.round_index,
                    len(parts),
                    row.uploaded,
                    row.downloaded,
                    per_part,
                )
            )
            total_up += row.uploaded
            total_down += row.downloaded
        summary_rows.append((algo, nu_m, nu_omega, total_up, total_down))
    os.makedirs(out_dir, exist_ok=True)
    transfers_path = os.path.join(out_dir, "transfers.csv")
    write_table(
        transfers_path,
        (
            "algo",
            "round",
            "participants",
            "uploaded_params",
            "downloaded_params",
            "per_participant_upload",
        ),
        transfer_rows,
    )
    summary_path = os.path.join(out_dir, "summary.csv")
    write_table(
        summary_path,
        ("algo", "params_per_model", "extractor_params", "total_uploaded", "total_downloaded"),
        summary_rows,
    )
    result.paths.extend([transfers_path, summary_path])
    result.data = {
        "reports": reports,
        "nu_m": nu_m,
        "nu_omega": nu_omega,
        "seed": seed,
    }
    return result


PRESETS: dict[str, Callable[[int, str, dict[str, Any]], PresetResult]] = {
    "cka-layers": preset_cka_layers,
    "shard-similarity": preset_shard_similarity,
    "metric-compare": preset_metric_compare,
    "main-table": preset_main_table,
    "rho-sweep": preset_rho_sweep,
    "comm-audit": preset_comm_audit,
}


def run_preset(
    name: str,
    seed: int = 0,
    out_dir: str | None = None,
    overrides: dict[str, Any] | None = None,
) -> PresetResult:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; choose from: {known}")
    if out_dir is None:
        out_dir = os.path.join(output_root(), name)
    return PRESETS[name](seed, out_dir, dict(overrides or {}))
