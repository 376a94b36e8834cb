"""Federated training loops: FedAvg, a similarity-personalized variant, baselines.

Four algorithms share one client runtime.  ``fedavg`` trains a single global
model; ``pfedsim`` runs a FedAvg warm-up for a configurable fraction of the
rounds and then switches to per-client extractor aggregation weighted by a
classifier-similarity matrix, with classifiers kept local; ``local`` never
communicates; ``fedper`` averages extractors only while classifiers stay
local from the start.

Every random draw comes from a stream keyed by (master seed, purpose, round,
client), so any round replays in isolation and the warm-up phase is
bit-identical to a plain FedAvg run under the same seed.  Parameter arrays
are never mutated in place, which is what makes the bitwise trace
comparisons in the tests meaningful.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import nn
from .data import LabeledDataset, PartitionedDataset
from .errors import ConfigError, DegenerateInputError, ShapeError
from .rng import stream
from .similarity import SimilarityMatrix, update_similarity_matrix

FEDAVG = "fedavg"
PFEDSIM = "pfedsim"
LOCAL_ONLY = "local"
FEDPER = "fedper"
ALGORITHMS = (FEDAVG, PFEDSIM, LOCAL_ONLY, FEDPER)


def _scaled_count(value: float) -> int:
    """Floor of a product like rho*T, guarded against float droop.

    0.7 * 60 evaluates to 41.999999999999996; rounding to nine decimals
    before flooring restores the intended 42 without affecting genuinely
    fractional products.
    """
    return int(np.floor(round(value, 9)))


@dataclass
class FederationConfig:
    """Protocol hyperparameters shared by all four algorithms."""

    n_clients: int = 20
    join_ratio: float = 0.25
    rounds: int = 60
    local_epochs: int = 5
    rho: float = 0.5
    lr: float = 0.01
    batch_size: int = 32
    epsilon: float = 1e-8
    algorithm: str = PFEDSIM
    hidden: tuple[int, ...] = (64, 32)

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.n_clients < 1:
            raise ConfigError(f"n_clients must be >= 1, got {self.n_clients}")
        if not 0.0 < self.join_ratio <= 1.0:
            raise ConfigError(f"join_ratio must be in (0, 1], got {self.join_ratio}")
        if self.rounds < 0:
            raise ConfigError(f"rounds must be >= 0, got {self.rounds}")
        if self.local_epochs < 1:
            raise ConfigError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must be in [0, 1], got {self.rho}")
        if self.lr < 0.0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}"
            )
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden}")

    @property
    def generalization_rounds(self) -> int:
        """Warm-up length: floor(rho * rounds)."""
        return _scaled_count(self.rho * self.rounds)

    @property
    def personalization_rounds(self) -> int:
        return self.rounds - self.generalization_rounds

    @property
    def participants_per_round(self) -> int:
        """floor(join_ratio * n), but never below one client."""
        return max(_scaled_count(self.join_ratio * self.n_clients), 1)


@dataclass
class RoundMetrics:
    round_index: int
    mean_accuracy: float
    std_accuracy: float
    uploaded: int
    downloaded: int


@dataclass
class ExperimentReport:
    """Everything a run produces, kept in memory until the harness writes it.

    The trace fields (``global_models``, ``classifier_*``) hold independent
    snapshots taken at well-defined moments, so tests can audit the run
    bitwise after the fact.  ``elapsed_seconds`` is informational only and is
    never written to output files.
    """

    algorithm: str
    n_clients: int
    generalization_rounds: int
    params_per_model: int
    rounds: list[RoundMetrics] = field(default_factory=list)
    participants: list[list[int]] = field(default_factory=list)
    final_accuracies: np.ndarray | None = None
    final_models: list[nn.Model] = field(default_factory=list)
    final_phi: np.ndarray | None = None
    client_train_sizes: list[int] = field(default_factory=list)
    client_test_sizes: list[int] = field(default_factory=list)
    client_labels: list[list[int]] = field(default_factory=list)
    global_models: list[np.ndarray] = field(default_factory=list)
    classifier_phase_entry: dict[int, np.ndarray] = field(default_factory=dict)
    classifier_round_end: list[dict[int, np.ndarray]] = field(default_factory=list)
    classifier_train_output: list[dict[int, np.ndarray]] = field(default_factory=list)
    elapsed_seconds: float = 0.0
    config_echo: dict | None = None


def evaluate(model: nn.Model, test_set: LabeledDataset) -> float:
    """Fraction of argmax-correct predictions (ties go to the lowest class)."""
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    return float(np.mean(nn.predict(model, test_set.x) == test_set.y))


def sample_participants(config: FederationConfig, seed: int, round_index: int) -> list[int]:
    """Uniform draw without replacement from all clients, one stream per round."""
    rng = stream(seed, "sampler", round_index)
    ids = rng.choice(config.n_clients, size=config.participants_per_round, replace=False)
    return sorted(int(i) for i in ids)


def _weighted_layers(
    layer_sets: Sequence[Sequence[nn.DenseLayer]], weights: Sequence[float]
) -> list[nn.DenseLayer]:
    """Parameter-wise weighted sum of structurally identical layer stacks."""
    reference = layer_sets[0]
    merged = []
    for index, ref_layer in enumerate(reference):
        w_sum = np.zeros_like(ref_layer.weights)
        b_sum = np.zeros_like(ref_layer.bias)
        for weight, layers in zip(weights, layer_sets):
            layer = layers[index]
            if (
                layer.weights.shape != ref_layer.weights.shape
                or layer.activation != ref_layer.activation
            ):
                raise ShapeError(f"layer {index} differs in shape or activation")
            w_sum += weight * layer.weights
            b_sum += weight * layer.bias
        merged.append(nn.DenseLayer(w_sum, b_sum, ref_layer.activation))
    return merged


def fedavg_aggregate(
    models: Mapping[int, nn.Model], sizes: Mapping[int, int]
) -> nn.Model:
    """Weighted mean of participant models, weights proportional to data sizes."""
    if not models:
        raise ValueError("cannot aggregate an empty participant set")
    ordered = sorted(models)
    missing = [i for i in ordered if i not in sizes]
    if missing:
        raise ValueError(f"no data sizes for participants {missing}")
    total = float(sum(sizes[i] for i in ordered))
    if total <= 0.0:
        raise ValueError("participant data sizes sum to zero")
    weights = [sizes[i] / total for i in ordered]
    layer_sets = [models[i].layers for i in ordered]
    return nn.Model(_weighted_layers(layer_sets, weights))


def personalized_aggregate(
    target: int,
    phi: SimilarityMatrix,
    extractors: Mapping[int, Sequence[nn.DenseLayer]] | Sequence[Sequence[nn.DenseLayer]],
) -> list[nn.DenseLayer]:
    """Similarity-weighted mean of stored extractors for one client.

    Uses the target's row of the similarity matrix over all clients with a
    positive entry; zero-weight clients are skipped, so their extractors may
    be absent.  The target's classifier is untouched by construction (this
    returns extractor layers only).
    """
    row = phi.row(target)
    contributors = [j for j in range(phi.n) if row[j] > 0.0]
    denom = float(sum(row[j] for j in contributors))
    if denom <= 0.0:
        raise DegenerateInputError(
            f"similarity row of client {target} sums to zero"
        )
    layer_sets = []
    for j in contributors:
        try:
            layer_sets.append(extractors[j])
        except (KeyError, IndexError):
            raise ValueError(
                f"no stored extractor for client {j} (weight {row[j]})"
            ) from None
    weights = [row[j] / denom for j in contributors]
    return _weighted_layers(layer_sets, weights)


def _classifier_snapshot(layer: nn.DenseLayer) -> np.ndarray:
    """Fresh flat copy of a classifier's parameters, safe to compare bitwise."""
    return np.concatenate([layer.weights.ravel(), layer.bias])


def _record_round(
    report: ExperimentReport,
    round_index: int,
    accuracies: Sequence[float],
    uploaded: int,
    downloaded: int,
    participants: list[int],
) -> None:
    accs = np.asarray(accuracies, dtype=np.float64)
    report.rounds.append(
        RoundMetrics(
            round_index=round_index,
            mean_accuracy=float(accs.mean()),
            std_accuracy=float(accs.std()),
            uploaded=uploaded,
            downloaded=downloaded,
        )
    )
    report.participants.append(list(participants))


def _train_participant(
    model: nn.Model,
    client: int,
    round_index: int,
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
) -> nn.Model:
    split = data.clients[client]
    rng = stream(seed, "client", client, round_index)
    return nn.local_train(
        model,
        split.train.x,
        split.train.y,
        epochs=config.local_epochs,
        batch_size=config.batch_size,
        lr=config.lr,
        rng=rng,
    )


def _run_fedavg_rounds(
    model: nn.Model,
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
    report: ExperimentReport,
    first_round: int,
    num_rounds: int,
) -> nn.Model:
    """Plain FedAvg rounds indexed from ``first_round``; records every round."""
    nu_m = model.num_params
    for t in range(first_round, first_round + num_rounds):
        parts = sample_participants(config, seed, t)
        trained = {i: _train_participant(model, i, t, config, data, seed) for i in parts}
        sizes = {i: len(data.clients[i].train) for i in parts}
        model = fedavg_aggregate(trained, sizes)
        accs = [evaluate(model, data.clients[i].test) for i in range(config.n_clients)]
        transfer = len(parts) * nu_m
        _record_round(report, t, accs, transfer, transfer, parts)
        report.global_models.append(nn.flatten_params(model))
    return model


def run_generalization_phase(
    model: nn.Model,
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
    report: ExperimentReport,
) -> nn.Model:
    """FedAvg warm-up for the configured number of generalization rounds."""
    return _run_fedavg_rounds(
        model, config, data, seed, report, 0, config.generalization_rounds
    )


def run_personalization_phase(
    entry_model: nn.Model,
    phi: SimilarityMatrix,
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
    report: ExperimentReport,
    freeze_phi: bool = False,
) -> tuple[list[nn.Model], SimilarityMatrix]:
    """Per-client rounds with similarity-weighted extractor aggregation.

    Every client enters with a copy of the warm-up model.  Each round the
    sampled participants first all receive their aggregated extractor
    (assembled from the round-start registry, so ordering cannot matter),
    then train locally; classifiers travel only between a client and its own
    registry slot.  With ``freeze_phi`` the matrix stays as passed in, which
    with an identity matrix degenerates to independent local fine-tuning.
    """
    n = config.n_clients
    if phi.n != n:
        raise ConfigError(f"similarity matrix is {phi.n}x{phi.n}, expected {n}x{n}")
    extractors: list[list[nn.DenseLayer]] = [entry_model.extractor for _ in range(n)]
    classifiers: list[nn.DenseLayer] = [entry_model.classifier for _ in range(n)]
    report.classifier_phase_entry = {
        i: _classifier_snapshot(classifiers[i]) for i in range(n)
    }
    nu_m = entry_model.num_params
    first = config.generalization_rounds
    for t in range(first, config.rounds):
        parts = sample_participants(config, seed, t)
        assembled = {i: personalized_aggregate(i, phi, extractors) for i in parts}
        trained = {}
        for i in parts:
            start_model = nn.join_model(assembled[i], classifiers[i])
            trained[i] = _train_participant(start_model, i, t, config, data, seed)
        train_out = {}
        for i in parts:
            extractors[i] = trained[i].extractor
            classifiers[i] = trained[i].classifier
            train_out[i] = _classifier_snapshot(classifiers[i])
        if not freeze_phi:
            bounds = {i: nn.decision_boundaries(classifiers[i]) for i in parts}
            phi = update_similarity_matrix(phi, set(parts), bounds, config.epsilon)
        accs = [
            evaluate(nn.join_model(extractors[i], classifiers[i]), data.clients[i].test)
            for i in range(n)
        ]
        transfer = len(parts) * nu_m
        _record_round(report, t, accs, transfer, transfer, parts)
        report.classifier_train_output.append(train_out)
        report.classifier_round_end.append(
            {i: _classifier_snapshot(classifiers[i]) for i in range(n)}
        )
    models = [nn.join_model(extractors[i], classifiers[i]) for i in range(n)]
    return models, phi


def _run_local_only(
    init_model: nn.Model,
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
    report: ExperimentReport,
) -> list[nn.Model]:
    """Each client trains alone from the shared init; no communication at all."""
    n = config.n_clients
    models = [init_model for _ in range(n)]
    everyone = list(range(n))
    for t in range(config.rounds):
        for i in everyone:
            models[i] = _train_participant(models[i], i, t, config, data, seed)
        accs = [evaluate(models[i], data.clients[i].test) for i in range(n)]
        _record_round(report, t, accs, 0, 0, everyone)
    return models


def _run_fedper(
    init_model: nn.Model,
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
    report: ExperimentReport,
) -> list[nn.Model]:
    """Extractor-only FedAvg; classifiers stay local from the shared init on."""
    n = config.n_clients
    extractor = init_model.extractor
    classifiers = [init_model.classifier for _ in range(n)]
    nu_omega = sum(layer.num_params for layer in extractor)
    for t in range(config.rounds):
        parts = sample_participants(config, seed, t)
        trained = {}
        for i in parts:
            start_model = nn.join_model(extractor, classifiers[i])
            trained[i] = _train_participant(start_model, i, t, config, data, seed)
        total = float(sum(len(data.clients[i].train) for i in parts))
        weights = [len(data.clients[i].train) / total for i in parts]
        extractor = _weighted_layers([trained[i].extractor for i in parts], weights)
        for i in parts:
            classifiers[i] = trained[i].classifier
        accs = [
            evaluate(nn.join_model(extractor, classifiers[i]), data.clients[i].test)
            for i in range(n)
        ]
        transfer = len(parts) * nu_omega
        _record_round(report, t, accs, transfer, transfer, parts)
    return [nn.join_model(extractor, classifiers[i]) for i in range(n)]


def run_experiment(
    config: FederationConfig,
    data: PartitionedDataset,
    seed: int,
    init_model: nn.Model | None = None,
    freeze_phi: bool = False,
) -> ExperimentReport:
    """Run one algorithm end to end and collect the full report.

    The initial model defaults to a Glorot init drawn from the seed's "init"
    stream, so all algorithms under one seed start from identical weights.
    ``freeze_phi`` only affects the personalized algorithm.
    """
    if data.n_clients != config.n_clients:
        raise ConfigError(
            f"partition has {data.n_clients} clients, config says {config.n_clients}"
        )
    start = time.perf_counter()
    dim = data.clients[0].train.dim
    if init_model is None:
        init_model = nn.init_mlp(dim, config.hidden, data.class_count, stream(seed, "init"))
    if init_model.in_width != dim or init_model.num_classes != data.class_count:
        raise ConfigError(
            f"model expects {init_model.in_width}-dim {init_model.num_classes}-class "
            f"data, partition provides {dim}-dim {data.class_count}-class"
        )
    report = ExperimentReport(
        algorithm=config.algorithm,
        n_clients=config.n_clients,
        generalization_rounds=0,
        params_per_model=init_model.num_params,
    )
    if config.algorithm == FEDAVG:
        report.generalization_rounds = config.rounds
        model = _run_fedavg_rounds(
            init_model, config, data, seed, report, 0, config.rounds
        )
        models = [model for _ in range(config.n_clients)]
        report.final_phi = None
    elif config.algorithm == PFEDSIM:
        report.generalization_rounds = config.generalization_rounds
        model = run_generalization_phase(init_model, config, data, seed, report)
        phi = SimilarityMatrix.identity(config.n_clients)
        models, phi = run_personalization_phase(
            model, phi, config, data, seed, report, freeze_phi=freeze_phi
        )
        report.final_phi = phi.values
    elif config.algorithm == LOCAL_ONLY:
        models = _run_local_only(init_model, config, data, seed, report)
        report.final_phi = None
    else:
        models = _run_fedper(init_model, config, data, seed, report)
        report.final_phi = None
    report.final_models = models
    report.final_accuracies = np.array(
        [evaluate(models[i], data.clients[i].test) for i in range(config.n_clients)]
    )
    for i in range(config.n_clients):
        split = data.clients[i]
        report.client_train_sizes.append(len(split.train))
        report.client_test_sizes.append(len(split.test))
        labels = split.train.labels_present() | split.test.labels_present()
        report.client_labels.append(sorted(labels))
    report.elapsed_seconds = time.perf_counter() - start
    return report
