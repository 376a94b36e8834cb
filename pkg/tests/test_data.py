"""Tests for dataset generation, partitioning, and the label-overlap distance."""

from __future__ import annotations

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from pfedsim.data import (
    LabeledDataset,
    _largest_remainder,
    data_distance,
    data_similarity,
    dirichlet_partition,
    load_dataset_csv,
    make_blobs,
    save_dataset_csv,
    shard_partition,
)
from pfedsim.errors import ConfigError
from pfedsim.rng import stream

FOUR_SHARDS = [{0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}, {2, 3, 4, 5, 6}, {5, 6, 7, 8, 9}]


def labeled(y) -> LabeledDataset:
    y = np.asarray(y)
    return LabeledDataset(np.zeros((y.shape[0], 2)), y)


def row_keys(dataset: LabeledDataset) -> set[bytes]:
    return {row.tobytes() for row in dataset.x}


class TestMakeBlobs:
    def test_counts_and_labels(self, rng):
        data = make_blobs(2, 5, 3, 1.0, rng)
        assert len(data) == 10
        assert data.dim == 3
        assert np.bincount(data.y).tolist() == [5, 5]

    def test_vanishing_spread_collapses_to_class_means(self, rng):
        data = make_blobs(4, 30, 6, 1e-12, rng)
        for c in range(4):
            block = data.x[data.y == c]
            assert np.abs(block - block[0]).max() < 1e-9

    def test_default_spread_is_linearly_separable(self):
        # calibration check: a plain linear model gets >= 90% on the full set
        for seed in range(5):
            data = make_blobs(10, 250, 20, 1.25, stream(seed, "data"))
            clf = LogisticRegression(max_iter=2000)
            clf.fit(data.x, data.y)
            assert clf.score(data.x, data.y) >= 0.9

    def test_determinism(self):
        a = make_blobs(3, 10, 4, 0.5, stream(9, "data"))
        b = make_blobs(3, 10, 4, 0.5, stream(9, "data"))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(classes=1, per_class=5, dim=2, cluster_spread=1.0),
            dict(classes=2, per_class=0, dim=2, cluster_spread=1.0),
            dict(classes=2, per_class=5, dim=2, cluster_spread=0.0),
        ],
    )
    def test_bad_arguments_rejected(self, kwargs, rng):
        with pytest.raises(ValueError):
            make_blobs(rng=rng, **kwargs)


class TestDirichletPartition:
    def test_conserves_the_source_exactly(self, rng):
        source = make_blobs(5, 40, 3, 1.0, rng)
        part = dirichlet_partition(source, 4, 0.5, rng)
        total = 0
        hist = np.zeros(5, dtype=int)
        for client in part.clients:
            for side in (client.train, client.test):
                total += len(side)
                hist += np.bincount(side.y, minlength=5)
        assert total == len(source)
        assert np.array_equal(hist, np.bincount(source.y, minlength=5))

    def test_train_test_sizes_and_disjointness(self, rng):
        source = make_blobs(5, 41, 3, 1.0, rng)  # odd shares are likely
        part = dirichlet_partition(source, 3, 1.0, rng)
        for client in part.clients:
            diff = len(client.train) - len(client.test)
            assert diff in (0, 1)  # odd sample goes to train
            assert not (row_keys(client.train) & row_keys(client.test))

    def test_every_client_gets_minimum_share(self, rng):
        source = make_blobs(10, 100, 4, 1.0, rng)
        part = dirichlet_partition(source, 8, 0.1, rng)
        for client in part.clients:
            assert len(client.train) + len(client.test) >= 20

    def test_determinism(self):
        source = make_blobs(4, 50, 3, 1.0, stream(2, "data"))
        a = dirichlet_partition(source, 5, 0.3, stream(2, "part"))
        b = dirichlet_partition(source, 5, 0.3, stream(2, "part"))
        for ca, cb in zip(a.clients, b.clients):
            assert np.array_equal(ca.train.x, cb.train.x)
            assert np.array_equal(ca.test.y, cb.test.y)

    def test_huge_alpha_gives_near_uniform_histograms(self, rng):
        source = make_blobs(5, 200, 3, 1.0, rng)
        part = dirichlet_partition(source, 4, 1e6, rng)
        for client in part.clients:
            pooled = np.concatenate([client.train.y, client.test.y])
            hist = np.bincount(pooled, minlength=5)
            assert hist.max() <= 1.1 * hist.min() + 1

    def test_single_client_receives_everything(self, rng):
        source = make_blobs(3, 20, 2, 1.0, rng)
        part = dirichlet_partition(source, 1, 0.5, rng)
        assert len(part.clients[0].train) + len(part.clients[0].test) == 60

    def test_low_alpha_leaves_most_classes_absent(self):
        # strong label skew: over half the classes missing per client
        fractions = []
        for seed in range(3):
            rng = stream(seed, "data")
            source = make_blobs(10, 250, 20, 1.25, rng)
            part = dirichlet_partition(source, 20, 0.1, rng)
            for client in part.clients:
                present = client.train.labels_present() | client.test.labels_present()
                fractions.append(1.0 - len(present) / 10)
        assert np.mean(fractions) > 0.3

    def test_low_alpha_skew_against_independent_sampler(self):
        # proportions-only Monte-Carlo at n=100, C=10: no minimum-size rule,
        # just Dirichlet draws and largest-remainder rounding of 250 per class
        per_seed = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            counts = np.zeros((10, 100), dtype=int)
            for c in range(10):
                counts[c] = _largest_remainder(rng.dirichlet(np.full(100, 0.1)), 250)
            per_seed.append((counts == 0).mean())
        assert np.mean(per_seed) > 0.3

    def test_too_small_dataset_raises_config_error(self, rng):
        source = make_blobs(10, 2, 2, 1.0, rng)  # 20 samples, 2 clients need 40
        with pytest.raises(ConfigError, match="too small"):
            dirichlet_partition(source, 2, 0.5, rng)

    def test_bad_arguments_rejected(self, rng):
        source = make_blobs(3, 20, 2, 1.0, rng)
        with pytest.raises(ValueError):
            dirichlet_partition(source, 0, 0.5, rng)
        with pytest.raises(ValueError):
            dirichlet_partition(source, 2, 0.0, rng)


class TestLargestRemainder:
    def test_conserves_total(self, rng):
        for _ in range(50):
            props = rng.dirichlet(np.full(7, 0.4))
            counts = _largest_remainder(props, 123)
            assert counts.sum() == 123
            assert (counts >= 0).all()

    def test_exact_proportions_pass_through(self):
        counts = _largest_remainder(np.array([0.25, 0.5, 0.25]), 8)
        assert counts.tolist() == [2, 4, 2]


class TestShardPartition:
    def test_one_shard_holds_everything(self, rng):
        source = make_blobs(4, 25, 3, 1.0, rng)
        part = shard_partition(source, [set(range(4))], rng)
        assert part.n_clients == 1
        client = part.clients[0]
        assert len(client.train) + len(client.test) == len(source)

    def test_disjoint_shards_split_exactly_by_label(self, rng):
        source = make_blobs(10, 30, 3, 1.0, rng)
        part = shard_partition(source, [{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}], rng)
        for k, owned in enumerate([{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}]):
            pooled = np.concatenate([part.clients[k].train.y, part.clients[k].test.y])
            hist = np.bincount(pooled, minlength=10)
            for label in range(10):
                assert hist[label] == (30 if label in owned else 0)

    def test_shared_labels_split_within_binomial_bounds(self, rng):
        per_class = 250
        source = make_blobs(10, per_class, 3, 1.0, rng)
        part = shard_partition(source, FOUR_SHARDS, rng)
        owners = {
            label: [k for k, s in enumerate(FOUR_SHARDS) if label in s]
            for label in range(10)
        }
        for label, who in owners.items():
            p = 1.0 / len(who)
            sigma = np.sqrt(per_class * p * (1.0 - p))
            for k in who:
                pooled = np.concatenate(
                    [part.clients[k].train.y, part.clients[k].test.y]
                )
                count = int((pooled == label).sum())
                assert abs(count - per_class * p) <= 3.0 * sigma + 1e-9

    def test_unowned_labels_are_dropped(self, rng):
        source = make_blobs(3, 15, 2, 1.0, rng)
        part = shard_partition(source, [{0}, {1}], rng)
        kept = sum(len(c.train) + len(c.test) for c in part.clients)
        assert kept == 30  # the 15 label-2 samples vanish

    def test_out_of_range_label_rejected(self, rng):
        source = make_blobs(3, 10, 2, 1.0, rng)
        with pytest.raises(ValueError, match="shard 1"):
            shard_partition(source, [{0}, {7}], rng)


class TestDataDistance:
    def test_identical_label_sets_give_zero_distance(self):
        a, b = labeled([0, 1, 1, 2]), labeled([2, 0, 1])
        assert data_distance(a, b) == 0.0
        assert data_similarity(a, b) == 1.0

    def test_disjoint_label_sets_give_unit_distance(self):
        a, b = labeled([0, 0, 1]), labeled([2, 3])
        assert data_distance(a, b) == 1.0
        assert data_similarity(a, b) == 0.0

    def test_hand_computed_mixed_case(self):
        # common label {1}: 1 of 3 samples in a, 1 of 2 in b -> 1 - 2/5
        a, b = labeled([0, 0, 1]), labeled([1, 2])
        assert data_distance(a, b) == pytest.approx(0.6, abs=1e-15)

    def test_symmetry_and_self_distance(self, rng):
        a = labeled(rng.integers(0, 5, size=17))
        b = labeled(rng.integers(0, 5, size=11))
        assert data_distance(a, b) == data_distance(b, a)
        assert data_distance(a, a) == 0.0
        assert 0.0 <= data_distance(a, b) <= 1.0

    def test_four_shard_similarity_ladder(self):
        # strict ordering (i,i') > (i,j) > (j,k) > (i,k) on every seed
        for seed in range(3):
            rng = stream(seed, "data")
            source = make_blobs(10, 250, 20, 1.25, rng)
            part = shard_partition(source, FOUR_SHARDS, rng)
            pooled = [
                LabeledDataset(
                    np.vstack([c.train.x, c.test.x]),
                    np.concatenate([c.train.y, c.test.y]),
                )
                for c in part.clients
            ]
            s_ii = data_similarity(pooled[0], pooled[1])
            s_ij = data_similarity(pooled[0], pooled[2])
            s_jk = data_similarity(pooled[2], pooled[3])
            s_ik = data_similarity(pooled[0], pooled[3])
            assert s_ii == 1.0
            assert s_ik == 0.0
            assert s_ii > s_ij > s_jk > s_ik

    def test_empty_input_rejected(self):
        good = labeled([0, 1])
        empty = LabeledDataset(np.zeros((0, 2)), np.zeros(0, dtype=int))
        with pytest.raises(ValueError, match="nonempty"):
            data_distance(good, empty)


class TestCsvRoundTrip:
    def test_save_load_is_bitwise(self, tmp_path, rng):
        data = make_blobs(3, 12, 4, 0.8, rng)
        path = tmp_path / "dump.csv"
        save_dataset_csv(data, path)
        back = load_dataset_csv(path)
        assert np.array_equal(back.x, data.x)
        assert np.array_equal(back.y, data.y)
