from __future__ import annotations

import numpy as np
import pytest

from pfedsim import DatasetConfig, ExperimentConfig, PartitionConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quick_config():
    """Small but structurally complete experiment (mild skew, fast rounds)."""
    return ExperimentConfig(
        n_clients=6,
        rounds=8,
        dataset=DatasetConfig(per_class=60),
        partition=PartitionConfig(alpha=1.0),
    )


@pytest.fixture
def locality_auditor():
    """Counts classifier mutations not attributable to the owner's training.

    Walks the personalization-phase traces with a shadow registry: a
    non-participant's classifier must match the shadow bitwise, a
    participant's must match what its own local training returned.
    """

    def audit(report) -> int:
        violations = 0
        shadow = dict(report.classifier_phase_entry)
        start = report.generalization_rounds
        for k, parts in enumerate(report.participants[start:]):
            round_end = report.classifier_round_end[k]
            train_out = report.classifier_train_output[k]
            if set(train_out) != set(parts):
                violations += 1
            for i in range(report.n_clients):
                if i in parts:
                    if not np.array_equal(round_end[i], train_out[i]):
                        violations += 1
                else:
                    if not np.array_equal(round_end[i], shadow[i]):
                        violations += 1
                shadow[i] = round_end[i]
        return violations

    return audit
