"""Acceptance gate: eleven end-to-end criteria, one printed verdict line each.

The heavyweight presets run once per session and are shared across the
checks; every test prints its PASS/FAIL line even under output capture, so
a full run reads as a checklist.
"""

from __future__ import annotations

import dataclasses
import os

import numpy as np
import pytest

from pfedsim.config import ExperimentConfig, override_config
from pfedsim.federation import (
    FEDAVG,
    LOCAL_ONLY,
    PFEDSIM,
    fedavg_aggregate,
    personalized_aggregate,
)
from pfedsim.nn import (
    flatten_params,
    init_mlp,
    loss_and_grad,
    unflatten_params,
)
from pfedsim.presets import run_preset
from pfedsim.runner import run_single
from pfedsim.similarity import SimilarityMatrix


@pytest.fixture(scope="session")
def preset_root(tmp_path_factory):
    return tmp_path_factory.mktemp("presets")


@pytest.fixture(scope="session")
def main_table(preset_root):
    return run_preset("main-table", seed=0, out_dir=str(preset_root / "main-table"))


@pytest.fixture(scope="session")
def rho_sweep(preset_root):
    return run_preset("rho-sweep", seed=0, out_dir=str(preset_root / "rho-sweep"))


@pytest.fixture(scope="session")
def shard_similarity(preset_root):
    return run_preset(
        "shard-similarity", seed=0, out_dir=str(preset_root / "shard-similarity")
    )


@pytest.fixture(scope="session")
def metric_compare(preset_root):
    return run_preset(
        "metric-compare", seed=0, out_dir=str(preset_root / "metric-compare")
    )


@pytest.fixture(scope="session")
def cka_layers(preset_root):
    return run_preset("cka-layers", seed=0, out_dir=str(preset_root / "cka-layers"))


@pytest.fixture(scope="session")
def comm_audit(preset_root):
    return run_preset("comm-audit", seed=0, out_dir=str(preset_root / "comm-audit"))


def verdict(capsys, label: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"{label} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{label}: {detail}"


def test_a1_personalization_beats_baselines(main_table, capsys):
    summary = main_table.data["summary"]
    pfed, fedavg, local = (
        summary[PFEDSIM][0],
        summary[FEDAVG][0],
        summary[LOCAL_ONLY][0],
    )
    seeds = main_table.data["seeds"]
    per_seed_time = {
        s: sum(
            main_table.data["reports"][(algo, s)].elapsed_seconds
            for algo in ("local", "fedavg", "fedper", "pfedsim")
        )
        for s in seeds
    }
    slowest = max(per_seed_time.values())
    ok = pfed >= fedavg + 0.05 and pfed >= local and slowest < 300.0
    verdict(
        capsys,
        "A1",
        ok,
        f"pfedsim {pfed:.4f} vs fedavg+5pts {fedavg + 0.05:.4f} and local "
        f"{local:.4f}; slowest seed {slowest:.1f}s of 300s budget",
    )


def test_a2_shard_similarity_ordering(shard_similarity, capsys):
    orderings = shard_similarity.data["orderings"]
    hits = sum(orderings.values())
    ok = hits >= 4
    verdict(
        capsys,
        "A2",
        ok,
        f"strict ii > ij > jk > ik ordering in {hits}/{len(orderings)} seeds",
    )


def test_a3_classifier_similarity_tracks_data(metric_compare, capsys):
    spearman = metric_compare.data["spearman"]
    ok = abs(spearman["cs"] - 1.0) < 1e-12
    verdict(
        capsys,
        "A3",
        ok,
        f"cs spearman {spearman['cs']:.3f} vs data similarity "
        f"(mdb {spearman['mdb']:.3f}, ldb {spearman['ldb']:.3f} reported, "
        f"no threshold)",
    )


def test_a4_last_layer_discriminates_models(cka_layers, capsys):
    offdiag = cka_layers.data["mean_offdiag"]
    last = cka_layers.data["n_layers"] - 1
    seeds = cka_layers.data["seeds"]
    wins = sum(offdiag[(s, last)] < offdiag[(s, 0)] for s in seeds)
    first_mean = np.mean([offdiag[(s, 0)] for s in seeds])
    last_mean = np.mean([offdiag[(s, last)] for s in seeds])
    ok = wins == len(seeds)
    verdict(
        capsys,
        "A4",
        ok,
        f"last-layer mean off-diagonal CKA {last_mean:.3f} < first-layer "
        f"{first_mean:.3f} in {wins}/{len(seeds)} seeds",
    )


def test_a5_rho_one_is_fedavg_bitwise(capsys):
    config = ExperimentConfig()
    fedavg = run_single(config, 0, algorithm=FEDAVG)
    pfed = run_single(override_config(config, rho=1.0), 0, algorithm=PFEDSIM)
    same_params = len(pfed.global_models) == len(fedavg.global_models) and all(
        np.array_equal(a, b)
        for a, b in zip(pfed.global_models, fedavg.global_models)
    )
    same_metrics = all(
        (a.mean_accuracy, a.std_accuracy, a.uploaded, a.downloaded)
        == (b.mean_accuracy, b.std_accuracy, b.uploaded, b.downloaded)
        for a, b in zip(pfed.rounds, fedavg.rounds)
    )
    same_final = np.array_equal(pfed.final_accuracies, fedavg.final_accuracies)
    ok = same_params and same_metrics and same_final
    verdict(
        capsys,
        "A5",
        ok,
        f"{len(fedavg.global_models)} rounds bit-identical "
        f"(global params, metrics, final accuracies; tolerance zero)",
    )


def test_a6_interior_rho_beats_endpoints(rho_sweep, capsys):
    summary = rho_sweep.data["summary"]
    left, right = summary[0.0][0], summary[1.0][0]
    interior = {rho: summary[rho][0] for rho in (0.3, 0.5, 0.7)}
    ok = all(acc > left and acc > right for acc in interior.values())
    listing = ", ".join(f"rho={rho}: {acc:.4f}" for rho, acc in interior.items())
    verdict(
        capsys,
        "A6",
        ok,
        f"{listing} all above endpoints rho=0: {left:.4f} and rho=1: {right:.4f}",
    )


def min_kink_distance(model, x) -> float:
    """Distance of the closest hidden pre-activation to its ReLU kink.

    Central differences are only a valid oracle away from the kinks, so the
    instance sampler below redraws anything inside a safety margin (with
    zero-init biases a fully dead first layer parks later pre-activations
    exactly on the kink, where the subgradient legitimately disagrees).
    """
    out = x
    closest = np.inf
    for layer in model.layers[:-1]:
        z = out @ layer.weights.T + layer.bias
        closest = min(closest, float(np.abs(z).min()))
        out = np.maximum(z, 0.0)
    return closest


def test_a7_gradients_match_central_differences(capsys):
    rng = np.random.default_rng(20230817)
    h = 1e-5
    worst = 0.0
    accepted = 0
    attempts = 0
    while accepted < 100 and attempts < 1000:
        attempts += 1
        dim = int(rng.integers(2, 7))
        depth = int(rng.integers(1, 3))
        hidden = tuple(int(rng.integers(3, 8)) for _ in range(depth))
        classes = int(rng.integers(2, 6))
        batch = int(rng.integers(1, 9))
        model = init_mlp(dim, hidden, classes, rng)
        x = rng.normal(size=(batch, dim))
        y = rng.integers(0, classes, size=batch)
        if min_kink_distance(model, x) <= 1e-3:
            continue
        accepted += 1
        _, grads = loss_and_grad(model, x, y)
        analytic = np.concatenate(
            [np.concatenate([dw.ravel(), db]) for dw, db in grads]
        )
        flat = flatten_params(model)
        numeric = np.empty_like(flat)
        for j in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[j] += h
            down[j] -= h
            numeric[j] = (
                loss_and_grad(unflatten_params(up, model), x, y)[0]
                - loss_and_grad(unflatten_params(down, model), x, y)[0]
            ) / (2.0 * h)
        rel = np.linalg.norm(analytic - numeric) / max(
            np.linalg.norm(numeric), 1e-12
        )
        worst = max(worst, rel)
    ok = worst < 1e-4 and accepted == 100
    verdict(
        capsys,
        "A7",
        ok,
        f"max relative error {worst:.2e} over {accepted} random instances "
        f"(step 1e-5, kink-adjacent draws redrawn)",
    )


def test_a8_aggregation_matches_scalar_oracle(capsys):
    rng = np.random.default_rng(77)
    worst_value = 0.0
    worst_weight = 0.0

    def flat_oracle(stacks, weights):
        # plain Python accumulation, one scalar at a time
        out = []
        for layer_index in range(len(stacks[0])):
            merged = [0.0] * stacks[0][layer_index].size
            for weight, stack in zip(weights, stacks):
                for k, value in enumerate(stack[layer_index].ravel().tolist()):
                    merged[k] += weight * value
            out.extend(merged)
        return np.array(out)

    for _ in range(25):
        count = int(rng.integers(2, 6))
        models = {i: init_mlp(3, (4,), 2, rng) for i in range(count)}
        sizes = {i: int(rng.integers(1, 40)) for i in range(count)}
        merged = fedavg_aggregate(models, sizes)
        total = sum(sizes.values())
        weights = [sizes[i] / total for i in sorted(models)]
        worst_weight = max(worst_weight, abs(sum(weights) - 1.0))
        stacks = [
            [l.weights for l in models[i].layers] + [l.bias for l in models[i].layers]
            for i in sorted(models)
        ]
        got = np.concatenate(
            [l.weights.ravel() for l in merged.layers]
            + [l.bias for l in merged.layers]
        )
        worst_value = max(
            worst_value, np.abs(got - flat_oracle(stacks, weights)).max()
        )

    for _ in range(25):
        n = int(rng.integers(2, 6))
        raw = rng.uniform(0.0, 2.0, size=(n, n))
        values = (raw + raw.T) / 2.0
        np.fill_diagonal(values, 1.0)
        phi = SimilarityMatrix(values)
        extractors = {
            j: init_mlp(3, (4,), 2, rng).extractor for j in range(n)
        }
        target = int(rng.integers(0, n))
        merged_layers = personalized_aggregate(target, phi, extractors)
        row = values[target]
        weights = [row[j] / row.sum() for j in range(n)]
        worst_weight = max(worst_weight, abs(sum(weights) - 1.0))
        stacks = [
            [l.weights for l in extractors[j]] + [l.bias for l in extractors[j]]
            for j in range(n)
        ]
        got = np.concatenate(
            [l.weights.ravel() for l in merged_layers]
            + [l.bias for l in merged_layers]
        )
        worst_value = max(
            worst_value, np.abs(got - flat_oracle(stacks, weights)).max()
        )

    ok = worst_value < 1e-12 and worst_weight <= 1e-12
    verdict(
        capsys,
        "A8",
        ok,
        f"max |aggregate - oracle| {worst_value:.1e} (tol 1e-12), "
        f"max |sum(w) - 1| {worst_weight:.1e}",
    )


def test_a9_classifiers_never_leave_their_owner(main_table, locality_auditor, capsys):
    violations = 0
    audited_rounds = 0
    for s in main_table.data["seeds"]:
        report = main_table.data["reports"][(PFEDSIM, s)]
        violations += locality_auditor(report)
        audited_rounds += len(report.classifier_round_end)
    ok = violations == 0
    verdict(
        capsys,
        "A9",
        ok,
        f"{violations} classifier mutations outside local training across "
        f"{audited_rounds} audited personalization rounds",
    )


def test_a10_upload_parity_with_fedavg(comm_audit, capsys):
    nu_m = comm_audit.data["nu_m"]
    reports = comm_audit.data["reports"]
    per_part = {}
    for algo in (FEDAVG, PFEDSIM):
        counts = {
            row.uploaded // len(parts)
            for row, parts in zip(
                reports[algo].rounds, reports[algo].participants
            )
        }
        exact = {
            row.uploaded % len(parts)
            for row, parts in zip(
                reports[algo].rounds, reports[algo].participants
            )
        }
        assert exact == {0}
        per_part[algo] = counts
    ok = per_part[PFEDSIM] == per_part[FEDAVG] == {nu_m}
    verdict(
        capsys,
        "A10",
        ok,
        f"per-participant upload {sorted(per_part[PFEDSIM])} params each round "
        f"for pfedsim, identical to fedavg's {nu_m}",
    )


def test_a11_preset_reruns_are_byte_identical(
    comm_audit, shard_similarity, metric_compare, preset_root, capsys
):
    compared = 0
    identical = True
    for first in (comm_audit, shard_similarity, metric_compare):
        rerun_dir = str(preset_root / f"{first.name}-rerun")
        second = run_preset(first.name, seed=0, out_dir=rerun_dir)
        rel_first = sorted(
            os.path.relpath(p, first.out_dir) for p in first.paths
        )
        rel_second = sorted(
            os.path.relpath(p, second.out_dir) for p in second.paths
        )
        if rel_first != rel_second:
            identical = False
            break
        for rel in rel_first:
            compared += 1
            with open(os.path.join(first.out_dir, rel), "rb") as a:
                with open(os.path.join(second.out_dir, rel), "rb") as b:
                    if a.read() != b.read():
                        identical = False
    verdict(
        capsys,
        "A11",
        identical,
        f"{compared} files byte-identical across fresh reruns of "
        f"comm-audit, shard-similarity, metric-compare",
    )
