"""Deterministic federated-learning simulator with similarity-based
personalization, on synthetic Gaussian-blob classification.

The package splits a small MLP into a feature extractor and a per-class
classifier head, runs FedAvg-style rounds over partitioned clients, and
personalizes by aggregating extractors with classifier-similarity weights.
Measurement utilities (linear CKA, decision-boundary cosines, metric
comparisons) back the canned studies in :mod:`pfedsim.presets`.
"""

from .config import (
    DatasetConfig,
    ExperimentConfig,
    PartitionConfig,
    override_config,
    parse_config,
)
from .data import (
    ClientSplit,
    LabeledDataset,
    PartitionedDataset,
    data_distance,
    data_similarity,
    dirichlet_partition,
    make_blobs,
    shard_partition,
)
from .errors import ConfigError, DegenerateInputError, ShapeError
from .federation import (
    ALGORITHMS,
    FEDAVG,
    FEDPER,
    LOCAL_ONLY,
    PFEDSIM,
    ExperimentReport,
    FederationConfig,
    RoundMetrics,
    evaluate,
    fedavg_aggregate,
    personalized_aggregate,
    run_experiment,
)
from .nn import (
    DenseLayer,
    Model,
    decision_boundaries,
    flatten_params,
    forward,
    init_mlp,
    local_train,
    loss_and_grad,
    predict,
    sgd_step,
    unflatten_params,
)
from .presets import PRESETS, PresetResult, run_preset
from .reporting import read_phi_csv, write_report
from .rng import stream
from .runner import build_partitioned_data, run_single
from .similarity import (
    SimilarityMatrix,
    classifier_similarity_plain,
    cosine,
    ldb_similarity,
    linear_cka,
    mdb_similarity,
    pfedsim_similarity,
    update_similarity_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "ClientSplit",
    "ConfigError",
    "DatasetConfig",
    "DegenerateInputError",
    "DenseLayer",
    "ExperimentConfig",
    "ExperimentReport",
    "FEDAVG",
    "FEDPER",
    "FederationConfig",
    "LOCAL_ONLY",
    "LabeledDataset",
    "Model",
    "PFEDSIM",
    "PRESETS",
    "PartitionConfig",
    "PartitionedDataset",
    "PresetResult",
    "RoundMetrics",
    "ShapeError",
    "SimilarityMatrix",
    "build_partitioned_data",
    "classifier_similarity_plain",
    "cosine",
    "data_distance",
    "data_similarity",
    "decision_boundaries",
    "dirichlet_partition",
    "evaluate",
    "fedavg_aggregate",
    "flatten_params",
    "forward",
    "init_mlp",
    "ldb_similarity",
    "linear_cka",
    "local_train",
    "loss_and_grad",
    "make_blobs",
    "mdb_similarity",
    "override_config",
    "parse_config",
    "personalized_aggregate",
    "pfedsim_similarity",
    "predict",
    "read_phi_csv",
    "run_experiment",
    "run_preset",
    "run_single",
    "sgd_step",
    "shard_partition",
    "stream",
    "unflatten_params",
    "update_similarity_matrix",
    "write_report",
]
