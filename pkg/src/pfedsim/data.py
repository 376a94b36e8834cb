"""Synthetic datasets, non-IID partitioning, and the label-overlap distance.

Two partition modes are provided: per-class Dirichlet allocation (smaller
alpha means stronger label skew) and manual label shards.  Both split each
client's share evenly into train and test halves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_REDRAW_BUDGET = 100


@dataclass
class LabeledDataset:
    """Feature rows ``x`` (count, dim) with integer class labels ``y`` (count,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError("features must be (count, dim) with one label per row")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def labels_present(self) -> set[int]:
        return set(int(v) for v in np.unique(self.y))

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.x[indices], self.y[indices])


@dataclass
class ClientSplit:
    train: LabeledDataset
    test: LabeledDataset


@dataclass
class PartitionedDataset:
    clients: list[ClientSplit]
    class_count: int

    @property
    def n_clients(self) -> int:
        return len(self.clients)


def make_blobs(
    classes: int,
    per_class: int,
    dim: int,
    cluster_spread: float,
    rng: np.random.Generator,
) -> LabeledDataset:
    """Isotropic Gaussian clusters, one per class, around standard-normal means.

    ``cluster_spread`` is the within-class standard deviation; larger values
    increase class overlap.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if cluster_spread <= 0.0:
        raise ValueError(f"cluster_spread must be positive, got {cluster_spread}")
    means = rng.standard_normal((classes, dim))
    noise = rng.standard_normal((classes * per_class, dim))
    x = np.repeat(means, per_class, axis=0) + cluster_spread * noise
    y = np.repeat(np.arange(classes), per_class)
    return LabeledDataset(x, y)


def _even_split(
    dataset: LabeledDataset, indices: np.ndarray, rng: np.random.Generator
) -> ClientSplit:
    # Shuffled even split; with an odd count the extra sample goes to train.
    order = rng.permutation(indices.shape[0])
    shuffled = indices[order]
    cut = (shuffled.shape[0] + 1) // 2
    return ClientSplit(
        train=dataset.subset(shuffled[:cut]),
        test=dataset.subset(shuffled[cut:]),
    )


def _infer_class_count(dataset: LabeledDataset) -> int:
    return int(dataset.y.max()) + 1


def dirichlet_partition(
    dataset: LabeledDataset,
    n: int,
    alpha: float,
    rng: np.random.Generator,
) -> PartitionedDataset:
    """Allocate each class across ``n`` clients by Dir(alpha) proportions.

    Class sample counts follow largest-remainder rounding of the drawn
    proportions, so the partition conserves the source exactly.  The whole
    draw is repeated (bounded budget) until every client holds at least
    ``2 * class_count`` samples, which keeps both halves of the even
    train/test split nonempty.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if len(dataset) == 0:
        raise ValueError("dataset is empty")

    class_count = _infer_class_count(dataset)
    class_indices = [np.flatnonzero(dataset.y == c) for c in range(class_count)]

    counts = None
    for _ in range(_REDRAW_BUDGET):
        attempt = np.zeros((class_count, n), dtype=np.int64)
        for c in range(class_count):
            total = class_indices[c].shape[0]
            if total == 0:
                continue
            attempt[c] = _largest_remainder(rng.dirichlet(np.full(n, alpha)), total)
        if attempt.sum(axis=0).min() >= 2 * class_count:
            counts = attempt
            break
    if counts is None:
        raise ConfigError(
            f"could not give every one of {n} clients at least "
            f"{2 * class_count} samples within {_REDRAW_BUDGET} draws; "
            "the dataset is too small for this partition"
        )

    per_client: list[list[np.ndarray]] = [[] for _ in range(n)]
    for c in range(class_count):
        if class_indices[c].shape[0] == 0:
            continue
        shuffled = class_indices[c][rng.permutation(class_indices[c].shape[0])]
        offset = 0
        for i in range(n):
            per_client[i].append(shuffled[offset : offset + counts[c, i]])
            offset += counts[c, i]

    clients = []
    for i in range(n):
        pooled = np.concatenate(per_client[i]) if per_client[i] else np.empty(0, np.int64)
        clients.append(_even_split(dataset, pooled, rng))
    return PartitionedDataset(clients, class_count)


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to ``total`` that best match the proportions."""
    quotas = proportions * total
    counts = np.floor(quotas).astype(np.int64)
    leftover = total - int(counts.sum())
    if leftover > 0:
        remainders = quotas - counts
        # Stable order: largest remainder first, index breaks ties.
        order = np.lexsort((np.arange(proportions.shape[0]), -remainders))
        counts[order[:leftover]] += 1
    return counts


def shard_partition(
    dataset: LabeledDataset,
    shards: list[set[int]],
    rng: np.random.Generator,
) -> PartitionedDataset:
    """Split by label ownership: each sample goes to one shard owning its label.

    Labels owned by several shards are split uniformly at random between
    them; samples whose label no shard owns are dropped.
    """
    class_count = _infer_class_count(dataset)
    for k, labels in enumerate(shards):
        bad = [c for c in labels if not 0 <= c < class_count]
        if bad:
            raise ValueError(f"shard {k} contains out-of-range labels {bad}")

    assigned: list[list[np.ndarray]] = [[] for _ in shards]
    for label in range(class_count):
        owners = [k for k, labels in enumerate(shards) if label in labels]
        indices = np.flatnonzero(dataset.y == label)
        if not owners or indices.shape[0] == 0:
            continue
        choice = rng.integers(0, len(owners), size=indices.shape[0])
        for slot, owner in enumerate(owners):
            assigned[owner].append(indices[choice == slot])

    clients = []
    for parts in assigned:
        pooled = np.concatenate(parts) if parts else np.empty(0, np.int64)
        clients.append(_even_split(dataset, pooled, rng))
    return PartitionedDataset(clients, class_count)


def data_distance(a: LabeledDataset, b: LabeledDataset) -> float:
    """Fraction of pooled samples whose label is NOT owned by both datasets.

    0 means every sample's label occurs on both sides, 1 means the label
    sets are disjoint.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("data_distance needs nonempty datasets")
    common = a.labels_present() & b.labels_present()
    if not common:
        return 1.0
    common_arr = np.array(sorted(common))
    shared = int(np.isin(a.y, common_arr).sum()) + int(np.isin(b.y, common_arr).sum())
    return 1.0 - shared / (len(a) + len(b))


def data_similarity(a: LabeledDataset, b: LabeledDataset) -> float:
    return 1.0 - data_distance(a, b)


def save_dataset_csv(dataset: LabeledDataset, path) -> None:
    """Debug dump: header ``label,x0..x{dim-1}``, one row per sample."""
    header = "label," + ",".join(f"x{j}" for j in range(dataset.dim))
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(header + "\n")
        for label, row in zip(dataset.y, dataset.x):
            values = ",".join(f"{v:.17g}" for v in row)
            handle.write(f"{int(label)},{values}\n")


def load_dataset_csv(path) -> LabeledDataset:
    """Inverse of :func:`save_dataset_csv`."""
    rows = []
    labels = []
    with open(path, "r", encoding="utf-8") as handle:
        next(handle)  # header
        for line in handle:
            parts = line.strip().split(",")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    return LabeledDataset(np.array(rows), np.array(labels))
