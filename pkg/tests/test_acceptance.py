"""Acceptance criteria, one test each, each printing a PASS/FAIL line."""
import math
import os
import time
from itertools import permutations
from pathlib import Path

import numpy as np
import pytest

from crossfuse import autodiff as ad
from crossfuse.experiment import ExperimentConfig, export_results, train
from crossfuse.graph import normalize_filter
from crossfuse.metrics import accuracy
from crossfuse.model import attention_weights
from crossfuse.selfsup import (gae_soft_assign, kl_divergence, student_t_assign,
                               target_distribution)
from crossfuse.synthetic import gaussian_blobs

from gradcheck import global_relative_error, numeric_grads
from modelcheck import loss_and_grads, loss_value, random_graph, random_instance

# Declared configuration for the synthetic end-to-end run.  Hidden widths are
# narrowed from the 500-wide default to suit 16-dimensional inputs and the
# single-core time budget; everything else is the default.
SYNTHETIC = dict(clusters=3, k=5, similarity="heat", dims=[64, 10, 3, 64, 64],
                 heads=8, gamma=0.5, lr=0.001, pretrain_epochs=50, epochs=200, seed=0)


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return report


def brute_force_accuracy(y_true, y_pred):
    classes, clusters = np.unique(y_true), np.unique(y_pred)
    k = max(len(classes), len(clusters))
    best = 0
    for perm in permutations(range(k), len(clusters)):
        mapping = dict(zip(clusters, perm))
        hits = sum(1 for t, p in zip(y_true, y_pred)
                   if mapping[p] < len(classes) and classes[mapping[p]] == t)
        best = max(best, hits)
    return best / len(y_true)


def dense_filter(A):
    A_hat = A + np.eye(len(A))
    d = A_hat.sum(axis=1)
    return A_hat / np.sqrt(np.outer(d, d))


@pytest.fixture(scope="module")
def synthetic_data():
    X, y, _ = gaussian_blobs(300, 16, 3, sigma=0.1, spacing=10.0, seed=0)
    return X, y


@pytest.fixture(scope="module")
def synthetic_full(synthetic_data):
    start = time.perf_counter()
    report = train(ExperimentConfig(**SYNTHETIC), *synthetic_data)
    return report, time.perf_counter() - start


# ------------------------------------------------------------------------

def test_gradient_oracle(verdict):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        inst = random_instance(seed)  # N <= 10, D <= 8, C = 2, L = 6, M = 2
        assert inst.X.shape[0] <= 10 and inst.X.shape[1] <= 8
        assert inst.spec.n_layers == 6 and inst.spec.heads == 2 and inst.spec.n_clusters == 2
        _, grads = loss_and_grads(inst)
        numeric = numeric_grads(loss_value(inst), inst.weights)
        worst = max(worst, global_relative_error(grads, numeric))
    elapsed = time.perf_counter() - start
    verdict("gradient oracle", worst < 1e-4 and elapsed < 60,
            f"20 instances, max relative error {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 60s)")


def test_distribution_invariants(verdict):
    rng = np.random.default_rng(0)
    worst_sum, worst_kl, worst_self = 0.0, math.inf, 0.0
    for _ in range(1000):
        n, d, c = int(rng.integers(1, 20)), int(rng.integers(1, 8)), int(rng.integers(2, 7))
        tape = ad.Tape()
        y = tape.constant(rng.normal(scale=2.0, size=(n, d)))
        wq, wk = (tape.constant(rng.normal(size=(d, d))) for _ in range(2))
        alpha = attention_weights(y, wq, wk).value
        T = student_t_assign(rng.normal(scale=3.0, size=(n, d)), rng.normal(size=(c, d)))
        P = target_distribution(T)
        Q = gae_soft_assign(rng.normal(scale=5.0, size=(n, c)))
        for M in (alpha, T, P, Q):
            worst_sum = max(worst_sum, float(np.abs(M.sum(axis=1) - 1).max()))
        worst_kl = min(worst_kl, kl_divergence(P, T), kl_divergence(P, Q))
        worst_self = max(worst_self, abs(kl_divergence(P, P)))
    ok = worst_sum <= 1e-9 and worst_kl >= -1e-12 and worst_self < 1e-9
    verdict("distribution invariants", ok,
            f"max |row sum - 1| {worst_sum:.1e}, min KL {worst_kl:.1e}, "
            f"max |KL(P,P)| {worst_self:.1e}")


def test_filter_oracle(verdict):
    rng = np.random.default_rng(0)
    worst, eig_lo, eig_hi = 0.0, math.inf, -math.inf
    for _ in range(100):
        n = int(rng.integers(1, 51))
        graph = random_graph(n, rng, density=float(rng.uniform(0.0, 0.6)))
        F = normalize_filter(graph).todense()
        worst = max(worst, float(np.abs(F - dense_filter(graph.todense())).max()))
        if n <= 20:
            eig = np.linalg.eigvalsh(F)
            eig_lo, eig_hi = min(eig_lo, eig.min()), max(eig_hi, eig.max())
    ok = worst <= 1e-14 and eig_lo >= -1 - 1e-9 and eig_hi <= 1 + 1e-9
    verdict("filter oracle", ok,
            f"100 graphs, max entry error {worst:.1e}, eigenvalues in [{eig_lo:.3f}, {eig_hi:.3f}]")


def test_accuracy_oracle(verdict):
    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 30))
        a = rng.integers(0, rng.integers(1, 7), size=n)
        b = rng.integers(0, rng.integers(1, 7), size=n)
        mismatches += accuracy(a, b) != brute_force_accuracy(a, b)
    verdict("accuracy oracle", mismatches == 0, f"{mismatches} mismatches in 500 pairs")


def test_target_sharpening(verdict):
    rng = np.random.default_rng(0)
    T = rng.dirichlet(np.ones(4), size=10_000)
    top2 = np.sort(T, axis=1)[:, -2:]
    assert np.all(top2[:, 1] > top2[:, 0])  # unique maxima
    P = target_distribution(T)
    flipped = int(np.sum(P.argmax(axis=1) != T.argmax(axis=1)))
    softer = int(np.sum(P.max(axis=1) < T.max(axis=1)))
    freq = T.sum(axis=0)
    verdict("target sharpening", flipped == 0 and softer == 0,
            f"10000 rows, argmax changed in {flipped}, P_max < T_max in {softer} "
            f"(column frequency ratio {freq.max() / freq.min():.3f})")


def test_synthetic_end_to_end(synthetic_full, synthetic_data, verdict):
    report, elapsed = synthetic_full
    m = report.metrics
    ok = m["acc"] >= 0.95 and m["nmi"] >= 0.85 and elapsed < 300
    verdict("synthetic end-to-end (full)", ok,
            f"ACC {m['acc']:.4f} (>= 0.95), NMI {m['nmi']:.4f} (>= 0.85), {elapsed:.1f}s (< 300s)")

    finite = {}
    for ablation in ("no-attention", "no-graph-loss", "no-content-loss"):
        r = train(ExperimentConfig(**SYNTHETIC, ablation=ablation), *synthetic_data)
        finite[ablation] = len(r.losses) == SYNTHETIC["epochs"] and all(
            np.isfinite(v) for row in r.losses for v in row.values())
    finite["full"] = all(np.isfinite(v) for row in report.losses for v in row.values())
    verdict("synthetic ablations", all(finite.values()),
            ", ".join(f"{k}: {'finite' if v else 'NON-FINITE'}" for k, v in finite.items()))


def test_ablation_algebra(verdict):
    worst = 0.0
    for seed in range(20):
        inst = random_instance(seed)
        full, _ = loss_and_grads(inst, "full")
        no_graph, _ = loss_and_grads(inst, "no-graph-loss")
        no_content, _ = loss_and_grads(inst, "no-content-loss")
        worst = max(worst,
                    abs(full["total"] - no_graph["total"] - full["l_gae_graph"]),
                    abs(full["total"] - no_content["total"] - full["l_gae_content"]))
    verdict("ablation algebra", worst <= 1e-10, f"max discrepancy {worst:.1e} over 20 instances")


def test_determinism(synthetic_full, synthetic_data, tmp_path, verdict):
    first, _ = synthetic_full
    second = train(ExperimentConfig(**SYNTHETIC), *synthetic_data)
    export_results(first, tmp_path / "a")
    export_results(second, tmp_path / "b")
    same = ((tmp_path / "a" / "assignments.csv").read_bytes()
            == (tmp_path / "b" / "assignments.csv").read_bytes())
    verdict("determinism", same, "assignments.csv byte-identical across two runs"
            if same else "assignments.csv differs between runs")


def test_acm_stretch(verdict, capsys):
    root = os.environ.get("CROSSFUSE_ACM_DIR")
    files = {name: Path(root, name) for name in ("features.csv", "graph.txt", "labels.txt")} \
        if root else {}
    if not files or not all(p.exists() for p in files.values()):
        with capsys.disabled():
            print("\n[SKIP] ACM stretch: set CROSSFUSE_ACM_DIR to a directory holding "
                  "features.csv, graph.txt and labels.txt")
        pytest.skip("ACM data not provided")
    config = ExperimentConfig(features=str(files["features.csv"]),
                              graph=str(files["graph.txt"]),
                              labels=str(files["labels.txt"]), clusters=3, epochs=200)
    report = train(config)
    verdict("ACM stretch", report.metrics["acc"] >= 0.85, f"ACC {report.metrics['acc']:.4f}")
