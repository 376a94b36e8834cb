"""Glue between configuration, data generation, and the training loops.

The dataset and its partition depend only on the seed and the data-related
config fields, never on the algorithm, so runs that share a seed are paired:
every algorithm sees byte-identical client datasets.
"""

from __future__ import annotations

from dataclasses import replace

from .config import DIRICHLET, ExperimentConfig
from .data import LabeledDataset, PartitionedDataset, dirichlet_partition, make_blobs, shard_partition
from .federation import ExperimentReport, run_experiment
from .rng import stream


def build_partitioned_data(
    config: ExperimentConfig, seed: int
) -> tuple[LabeledDataset, PartitionedDataset]:
    """Generate the pooled blob dataset and split it among clients."""
    rng = stream(seed, "data")
    source = make_blobs(
        classes=config.dataset.classes,
        per_class=config.dataset.per_class,
        dim=config.dataset.dim,
        cluster_spread=config.dataset.cluster_spread,
        rng=rng,
    )
    if config.partition.mode == DIRICHLET:
        partitioned = dirichlet_partition(
            source, config.n_clients, config.partition.alpha, rng
        )
    else:
        shards = [set(shard) for shard in config.partition.shards]
        partitioned = shard_partition(source, shards, rng)
    return source, partitioned


def run_single(
    config: ExperimentConfig,
    seed: int,
    algorithm: str | None = None,
    freeze_phi: bool = False,
) -> ExperimentReport:
    """One full run of one algorithm under one seed.

    ``algorithm`` overrides the configured one without touching the data
    streams, which is how paired cross-algorithm comparisons are built.
    """
    if algorithm is not None:
        config = replace(config, algorithm=algorithm)
    _, partitioned = build_partitioned_data(config, seed)
    report = run_experiment(
        config.federation(), partitioned, seed, freeze_phi=freeze_phi
    )
    report.config_echo = config.to_dict()
    return report


def run_all_seeds(config: ExperimentConfig) -> list[tuple[int, ExperimentReport]]:
    return [(seed, run_single(config, seed)) for seed in config.seeds]
