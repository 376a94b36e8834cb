"""Experiment configuration: JSON parsing, validation, serialization.

A config fully determines a run together with a seed.  Unknown keys are
rejected by name rather than ignored, since a typo like "btach_size" would
otherwise silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import ConfigError
from .federation import ALGORITHMS, PFEDSIM, FederationConfig

DIRICHLET = "dirichlet"
SHARD = "shard"
PARTITION_MODES = (DIRICHLET, SHARD)


def _as_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return value


def _as_float(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _reject_unknown(section: str, raw: dict) -> None:
    if raw:
        key = sorted(raw)[0]
        where = f"{section}." if section else ""
        raise ConfigError(f"unknown config key {where}{key!r}")


@dataclass
class DatasetConfig:
    """Synthetic blob generator settings."""

    classes: int = 10
    per_class: int = 250
    dim: int = 20
    cluster_spread: float = 1.25

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ConfigError(f"dataset.classes must be >= 2, got {self.classes}")
        if self.per_class < 1:
            raise ConfigError(f"dataset.per_class must be >= 1, got {self.per_class}")
        if self.dim < 1:
            raise ConfigError(f"dataset.dim must be >= 1, got {self.dim}")
        if self.cluster_spread <= 0.0:
            raise ConfigError(
                f"dataset.cluster_spread must be positive, got {self.cluster_spread}"
            )


@dataclass
class PartitionConfig:
    """How the pooled dataset is divided among clients."""

    mode: str = DIRICHLET
    alpha: float = 0.1
    shards: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.mode not in PARTITION_MODES:
            raise ConfigError(
                f"partition.mode must be one of {PARTITION_MODES}, got {self.mode!r}"
            )
        if self.alpha <= 0.0:
            raise ConfigError(f"partition.alpha must be positive, got {self.alpha}")
        if self.shards is not None:
            self.shards = tuple(
                tuple(sorted(int(label) for label in shard)) for shard in self.shards
            )
            if any(len(shard) == 0 for shard in self.shards):
                raise ConfigError("partition.shards entries must be nonempty")
        if self.mode == SHARD and not self.shards:
            raise ConfigError("partition.mode 'shard' requires partition.shards")


@dataclass
class ExperimentConfig:
    """Full experiment description; serializes losslessly to JSON."""

    algorithm: str = PFEDSIM
    n_clients: int = 20
    join_ratio: float = 0.25
    rounds: int = 60
    local_epochs: int = 5
    rho: float = 0.5
    lr: float = 0.01
    batch_size: int = 32
    epsilon: float = 1e-8
    hidden: tuple[int, ...] = (64, 32)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    seeds: tuple[int, ...] = (0,)
    output_dir: str | None = None
    preset: str | None = None

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.federation()  # reuse the protocol-level range checks
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if any(s < 0 for s in self.seeds):
            raise ConfigError(f"seeds must be nonnegative, got {self.seeds}")
        if self.partition.shards is not None:
            for shard in self.partition.shards:
                bad = [lb for lb in shard if not 0 <= lb < self.dataset.classes]
                if bad:
                    raise ConfigError(
                        f"partition.shards labels {bad} outside [0, {self.dataset.classes})"
                    )
        if self.partition.mode == SHARD and self.partition.shards is not None:
            if len(self.partition.shards) != self.n_clients:
                raise ConfigError(
                    f"shard mode assigns one shard per client: "
                    f"{len(self.partition.shards)} shards vs {self.n_clients} clients"
                )

    def federation(self) -> FederationConfig:
        return FederationConfig(
            n_clients=self.n_clients,
            join_ratio=self.join_ratio,
            rounds=self.rounds,
            local_epochs=self.local_epochs,
            rho=self.rho,
            lr=self.lr,
            batch_size=self.batch_size,
            epsilon=self.epsilon,
            algorithm=self.algorithm,
            hidden=self.hidden,
        )

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n_clients": self.n_clients,
            "join_ratio": self.join_ratio,
            "rounds": self.rounds,
            "local_epochs": self.local_epochs,
            "rho": self.rho,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epsilon": self.epsilon,
            "hidden": list(self.hidden),
            "dataset": {
                "classes": self.dataset.classes,
                "per_class": self.dataset.per_class,
                "dim": self.dataset.dim,
                "cluster_spread": self.dataset.cluster_spread,
            },
            "partition": {
                "mode": self.partition.mode,
                "alpha": self.partition.alpha,
                "shards": (
                    None
                    if self.partition.shards is None
                    else [list(shard) for shard in self.partition.shards]
                ),
            },
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "preset": self.preset,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    raw = dict(raw)
    kwargs: dict[str, Any] = {}
    for name in ("n_clients", "rounds", "local_epochs", "batch_size"):
        if name in raw:
            kwargs[name] = _as_int(name, raw.pop(name))
    for name in ("join_ratio", "rho", "lr", "epsilon"):
        if name in raw:
            kwargs[name] = _as_float(name, raw.pop(name))
    if "algorithm" in raw:
        algorithm = raw.pop("algorithm")
        if algorithm not in ALGORITHMS:
            raise ConfigError(
                f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}"
            )
        kwargs["algorithm"] = algorithm
    if "hidden" in raw:
        hidden = raw.pop("hidden")
        if not isinstance(hidden, list):
            raise ConfigError(f"hidden must be a list of widths, got {hidden!r}")
        kwargs["hidden"] = tuple(_as_int("hidden", h) for h in hidden)
    if "seeds" in raw:
        seeds = raw.pop("seeds")
        if not isinstance(seeds, list):
            raise ConfigError(f"seeds must be a list, got {seeds!r}")
        kwargs["seeds"] = tuple(_as_int("seeds", s) for s in seeds)
    for name in ("output_dir", "preset"):
        if name in raw:
            value = raw.pop(name)
            if value is not None and not isinstance(value, str):
                raise ConfigError(f"{name} must be a string or null, got {value!r}")
            kwargs[name] = value
    if "dataset" in raw:
        kwargs["dataset"] = _dataset_from_dict(raw.pop("dataset"))
    if "partition" in raw:
        kwargs["partition"] = _partition_from_dict(raw.pop("partition"))
    _reject_unknown("", raw)
    return ExperimentConfig(**kwargs)


def _dataset_from_dict(raw: Any) -> DatasetConfig:
    if not isinstance(raw, dict):
        raise ConfigError("dataset must be a JSON object")
    raw = dict(raw)
    kwargs: dict[str, Any] = {}
    for name in ("classes", "per_class", "dim"):
        if name in raw:
            kwargs[name] = _as_int(f"dataset.{name}", raw.pop(name))
    if "cluster_spread" in raw:
        kwargs["cluster_spread"] = _as_float(
            "dataset.cluster_spread", raw.pop("cluster_spread")
        )
    _reject_unknown("dataset", raw)
    return DatasetConfig(**kwargs)


def _partition_from_dict(raw: Any) -> PartitionConfig:
    if not isinstance(raw, dict):
        raise ConfigError("partition must be a JSON object")
    raw = dict(raw)
    kwargs: dict[str, Any] = {}
    if "mode" in raw:
        kwargs["mode"] = raw.pop("mode")
    if "alpha" in raw:
        kwargs["alpha"] = _as_float("partition.alpha", raw.pop("alpha"))
    if "shards" in raw:
        shards = raw.pop("shards")
        if shards is not None:
            if not isinstance(shards, list) or not all(
                isinstance(shard, list) for shard in shards
            ):
                raise ConfigError("partition.shards must be a list of label lists")
            shards = tuple(
                tuple(_as_int("partition.shards", lb) for lb in shard)
                for shard in shards
            )
        kwargs["shards"] = shards
    _reject_unknown("partition", raw)
    return PartitionConfig(**kwargs)


def parse_config(source: str) -> ExperimentConfig:
    """Parse JSON text into a validated config; absent keys take defaults."""
    try:
        raw = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def override_config(config: ExperimentConfig, **changes: Any) -> ExperimentConfig:
    """Dataclass replace that re-runs validation; alpha targets the partition."""
    alpha = changes.pop("alpha", None)
    if alpha is not None:
        config = replace(config, partition=replace(config.partition, alpha=alpha))
    present = {k: v for k, v in changes.items() if v is not None}
    return replace(config, **present) if present else config
