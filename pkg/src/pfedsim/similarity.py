"""Model similarity metrics.

The personalization protocol scores client pairs by comparing classifier
decision boundaries: a plain mean cosine for measurement studies, and an
adjusted variant (clamp negatives to zero, then ``-log(1 - cos)``) that
spreads out high similarities for aggregation weighting.  Linear CKA over
layer activations and two reference metrics (parameter-delta cosine,
evaluation-loss difference) support the metric comparison study.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .data import LabeledDataset
from .errors import DegenerateInputError, ShapeError

DEFAULT_EPSILON = 1e-8


def cosine(u: np.ndarray, v: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> float:
    """``u.v / (|u||v| + epsilon)``, kept strictly inside (-1, 1)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"vectors must share one shape, got {u.shape} and {v.shape}")
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    ratio = u @ v / (np.linalg.norm(u) * np.linalg.norm(v) + epsilon)
    # For norms far above 1 the additive epsilon is below rounding noise and
    # the ratio can land on +-1.0 exactly; the open interval is part of the
    # contract (the log transform downstream must stay finite), so clamp to
    # the nearest representable values inside it.
    limit = np.nextafter(1.0, 0.0)
    return float(np.clip(ratio, -limit, limit))


def classifier_similarity_plain(
    boundaries_a: np.ndarray,
    boundaries_b: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Mean cosine over matching decision-boundary rows of two classifiers."""
    a, b = _check_boundaries(boundaries_a, boundaries_b)
    return float(np.mean([cosine(a[c], b[c], epsilon) for c in range(a.shape[0])]))


def pfedsim_similarity(
    boundaries_a: np.ndarray,
    boundaries_b: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
) -> float:
    """Adjusted classifier similarity: mean of ``-log(1 - max(0, cos_c))``.

    Negative cosines clamp to zero (such clients should not collaborate);
    the log stretches near-1 cosines so similar clients stand out.  Always
    finite and nonnegative because epsilon keeps every cosine below 1.
    """
    a, b = _check_boundaries(boundaries_a, boundaries_b)
    total = 0.0
    for c in range(a.shape[0]):
        clamped = max(0.0, cosine(a[c], b[c], epsilon))
        total -= np.log(1.0 - clamped)
    return total / a.shape[0]


def _check_boundaries(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise ShapeError(
            f"expected matching (classes, width) boundary arrays, "
            f"got {a.shape} and {b.shape}"
        )
    return a, b


def linear_cka(acts_a: np.ndarray, acts_b: np.ndarray) -> float:
    """Linear centered kernel alignment between two activation matrices.

    Rows are probe samples (must match), columns are features.  Ranges over
    [0, 1]; invariant to orthogonal transforms and isotropic scaling of
    either side.
    """
    a = np.asarray(acts_a, dtype=np.float64)
    b = np.asarray(acts_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(
            f"activation matrices need equal row counts, got {a.shape} and {b.shape}"
        )
    a = a - a.mean(axis=0, keepdims=True)
    b = b - b.mean(axis=0, keepdims=True)
    cross = np.linalg.norm(b.T @ a, "fro") ** 2
    norm_a = np.linalg.norm(a.T @ a, "fro")
    norm_b = np.linalg.norm(b.T @ b, "fro")
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("an activation matrix has zero variance")
    return float(cross / (norm_a * norm_b))


def mdb_similarity(delta_a: np.ndarray, delta_b: np.ndarray) -> float:
    """Cosine of two full-parameter update vectors (after minus before)."""
    a = np.asarray(delta_a, dtype=np.float64)
    b = np.asarray(delta_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"deltas must share one shape, got {a.shape} and {b.shape}")
    norms = np.linalg.norm(a) * np.linalg.norm(b)
    if norms == 0.0:
        return 0.0
    return float(a @ b / norms)


def ldb_similarity(
    model_a: nn.Model, model_b: nn.Model, eval_set_a: LabeledDataset
) -> float:
    """Loss-difference similarity on client a's evaluation set.

    ``L_a(model_a) - L_a(model_b)``: positive when the other model fits
    client a's data better than its own.
    """
    if len(eval_set_a) == 0:
        raise ValueError("evaluation set is empty")
    return nn.mean_loss(model_a, eval_set_a.x, eval_set_a.y) - nn.mean_loss(
        model_b, eval_set_a.x, eval_set_a.y
    )


@dataclass
class SimilarityMatrix:
    """Symmetric nonnegative client-pair weights, identity at construction."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ShapeError("similarity matrix must be square")
        if not np.isfinite(self.values).all():
            raise ValueError("similarity matrix contains non-finite entries")
        if (self.values < 0.0).any():
            raise ValueError("similarity matrix contains negative entries")
        if not (self.values == self.values.T).all():
            raise ValueError("similarity matrix must be symmetric")

    @classmethod
    def identity(cls, n: int) -> "SimilarityMatrix":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]


def update_similarity_matrix(
    phi: SimilarityMatrix,
    participants: set[int],
    boundaries: dict[int, np.ndarray],
    epsilon: float = DEFAULT_EPSILON,
) -> SimilarityMatrix:
    """Recompute entries for every unordered participant pair.

    The diagonal and all entries touching non-participants are carried over
    unchanged; the result stays symmetric.
    """
    missing = sorted(i for i in participants if i not in boundaries)
    if missing:
        raise ValueError(f"no classifier boundaries for participants {missing}")
    values = phi.values.copy()
    ordered = sorted(participants)
    for ai, i in enumerate(ordered):
        for j in ordered[ai + 1 :]:
            score = pfedsim_similarity(boundaries[i], boundaries[j], epsilon)
            values[i, j] = score
            values[j, i] = score
    return SimilarityMatrix(values)
