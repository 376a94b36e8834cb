"""Do classifier decision boundaries know what data their model saw?

Four models start from one shared init and train independently on the
overlapping shard layout (labels 0-4, 0-4, 2-6, 5-9).  If the final-layer
rows really encode the local label distribution, the mean per-class cosine
between two classifiers should rank pairs exactly like the label overlap of
their datasets does.

Runs the canned study over a five-seed block and prints its summary file.
"""

import argparse
import tempfile
from pathlib import Path

from pfedsim import run_preset


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0, help="base of the seed block")
    parser.add_argument("--out", default=None, help="keep outputs here (default: temp dir)")
    args = parser.parse_args()

    out = args.out or tempfile.mkdtemp(prefix="shard-similarity-")
    result = run_preset("shard-similarity", seed=args.seed, out_dir=out)

    print(f"wrote {len(result.paths)} files under {result.out_dir}\n")
    print(Path(result.out_dir, "summary.csv").read_text())

    hits = sum(result.data["orderings"].values())
    n = len(result.data["orderings"])
    print(f"strict ordering sim(ii) > sim(ij) > sim(jk) > sim(ik): {hits}/{n} seeds")
    for seed, sims in sorted(result.data["sims"].items()):
        pretty = ", ".join(f"{k}={v:.3f}" for k, v in sims.items())
        print(f"  seed {seed}: {pretty}")


if __name__ == "__main__":
    main()
