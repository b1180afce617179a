"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line; the lines are repeated in the pytest
terminal summary.
"""
import json
import math
import time
from itertools import combinations

import numpy as np
import pytest

from cluster_embed import tsne
from cluster_embed.align import (AlignmentConfig, RigidTransform, align, alpha_heuristic, cluster_geometry,
                                 stress)
from cluster_embed.cli import main
from cluster_embed.cluster import ClusterAssignment, dbscan, kmeans, restrict
from cluster_embed.data import gen_gmm, gen_half_cylinder, gen_planar_clusters, save_csv
from cluster_embed.dissim import DataMatrix, build_knn_graph, euclidean_pairwise, geodesic_pairwise
from cluster_embed.embed import LoeConfig, embed_all_clusters, loe_embed, loe_loss_and_grad, scale_sync
from cluster_embed.metrics import knn_recall, normalized_stress, rand_index, spearman

from conftest import ACCEPTANCE_LINES, brute_euclidean, floyd_warshall, spearman_oracle

GMM_SEEDS = range(5)


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def gmm_pipeline(seed):
    dm = gen_gmm(10, 200, seed)
    delta = euclidean_pairwise(dm)
    a = kmeans(dm, 10, seed)
    ce = embed_all_clusters(dm, delta, a, "pca")
    return dm, delta, a, ce


def random_instance(seed, n_max=50):
    rng = np.random.default_rng(seed)
    kappa = int(rng.integers(2, 6))
    sizes = rng.multinomial(int(rng.integers(kappa * 3, n_max + 1)) - 3 * kappa, np.ones(kappa) / kappa) + 3
    x = np.vstack([rng.standard_normal((s, 3)) + rng.uniform(-5, 5, 3) for s in sizes])
    dm = DataMatrix(x, np.repeat(np.arange(kappa), sizes))
    delta = euclidean_pairwise(dm)
    a = ClusterAssignment(dm.labels)
    return rng, dm, delta, a, embed_all_clusters(dm, delta, a, "pca")


def test_criterion_01_flat_clusters_exact():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    blocks = []
    for c, centre in enumerate(([0, 0, 0], [12, 0, 3], [0, 12, -3])):
        basis, _ = np.linalg.qr(rng.standard_normal((3, 2)))
        blocks.append(rng.uniform(-2, 2, (200, 2)) @ basis.T + centre)
    dm = DataMatrix(np.vstack(blocks), np.repeat(np.arange(3), 200))
    delta = euclidean_pairwise(dm)
    a = kmeans(dm, 3, 0)
    ce = embed_all_clusters(dm, delta, a, "pca")
    alpha = alpha_heuristic(cluster_geometry(delta, a, ce))
    ge = align(delta, a, ce, AlignmentConfig(alpha=alpha))
    worst = max(normalized_stress(delta.submatrix(a.members(c)), ge.coords[a.members(c)])
                for c in range(a.kappa))
    elapsed = time.perf_counter() - t0
    ok = rand_index(a, dm.labels) == 1.0 and worst <= 1e-8 and elapsed < 10
    report(1, "flat clusters, per-cluster PCA stress <= 1e-8, n=600, < 10 s", ok,
           f"max stress {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_alpha_heuristic_on_gmm():
    t0 = time.perf_counter()
    alphas, taus = [], []
    for seed in GMM_SEEDS:
        _, delta, a, ce = gmm_pipeline(seed)
        g = cluster_geometry(delta, a, ce)
        alphas.append(alpha_heuristic(g))
        taus.append(g.tau)
    elapsed = time.perf_counter() - t0
    ok = all(1.45 <= x <= 2.05 for x in alphas) and all(3.6 <= t <= 4.9 for t in taus) and elapsed < 120
    report(2, "GMM alpha in [1.45, 2.05], tau in [3.6, 4.9], 5 seeds, < 2 min", ok,
           f"alpha {min(alphas):.3f}..{max(alphas):.3f}, tau {min(taus):.3f}..{max(taus):.3f}, {elapsed:.1f} s")


def _cross_component_nn_fraction(coords, labels):
    d = brute_nn(coords)
    return float(np.mean(labels[d] != labels))


def brute_nn(coords):
    from scipy.spatial import cKDTree
    _, idx = cKDTree(coords).query(coords, k=2)
    return idx[:, 1]


@pytest.mark.slow
def test_criterion_03_crowding_mitigation():
    fractions = []
    for seed in GMM_SEEDS:
        dm, delta, a, ce = gmm_pipeline(seed)
        pair = []
        for alpha in (1.0, 2.0):
            ge = align(delta, a, ce, AlignmentConfig(alpha=alpha, sweeps=5, tol=1e-4))
            pair.append(_cross_component_nn_fraction(ge.coords, dm.labels))
        fractions.append(pair)
    ok = all(f2 < f1 for f1, f2 in fractions)
    report(3, "cross-component NN fraction smaller at alpha=2 than alpha=1, 5 seeds", ok,
           ", ".join(f"{f1:.3f}->{f2:.3f}" for f1, f2 in fractions))


def _alignment_runs():
    runs = []
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        kappa = 2 + seed % 4
        sizes = rng.integers(8, 25, kappa)
        x = np.vstack([rng.standard_normal((s, 3)) * rng.uniform(0.5, 2) + rng.uniform(-6, 6, 3)
                       for s in sizes])
        labels = np.repeat(np.arange(kappa), sizes)
        dm = DataMatrix(x, labels)
        delta = euclidean_pairwise(dm)
        a = ClusterAssignment(labels)
        ce = embed_all_clusters(dm, delta, a, "pca")
        ge = align(delta, a, ce, AlignmentConfig(alpha=float(rng.uniform(1, 2)), sweeps=30, tol=1e-9))
        runs.append((a, ce, ge))
    return runs


@pytest.fixture(scope="module")
def alignment_runs():
    return _alignment_runs()


def test_criterion_04_monotone_sweeps(alignment_runs):
    worst = 0.0
    for _, _, ge in alignment_runs:
        h = ge.history
        for prev, cur in zip(h, h[1:]):
            worst = max(worst, (cur - prev) / prev if prev > 0 else cur)
    kappas = sorted({a.kappa for a, _, _ in alignment_runs})
    report(4, "recorded stress non-increasing to 1e-9 relative, 20 instances", worst <= 1e-9,
           f"largest relative increase {worst:.2e}, kappa {kappas}")


def test_criterion_05_rigidity(alignment_runs):
    worst = 0.0
    for a, ce, ge in alignment_runs:
        for c in range(a.kappa):
            before = brute_euclidean(ce.coords[c])
            after = brute_euclidean(ge.coords[a.members(c)])
            mask = before > 0
            worst = max(worst, float(np.max(np.abs(after[mask] - before[mask]) / before[mask])))
    report(5, "within-cluster distances preserved to 1e-9 relative", worst <= 1e-9, f"max rel error {worst:.2e}")


@pytest.mark.slow
def test_criterion_06_half_cylinder_recovery():
    t0 = time.perf_counter()
    spec = [(270, (-6, -2), 0.8), (270, (-1, 3), 0.8), (270, (5, -1), 0.8), (270, (0, -4), 0.8),
            (270, (6, 4), 0.8)]
    planar = gen_planar_clusters(spec, seed=0, background=150)
    cyl = gen_half_cylinder(planar)
    delta = geodesic_pairwise(build_knn_graph(cyl, 10))
    a = dbscan(cyl, 0.5, 10)
    sub, sub_delta, sub_a = restrict(cyl, delta, a)
    ce = embed_all_clusters(sub, sub_delta, sub_a, "pca")
    ge = align(sub_delta, sub_a, ce, AlignmentConfig(alpha=1.0))
    rho = spearman(sub_delta, ge.coords)
    ns = normalized_stress(sub_delta, ge.coords)
    elapsed = time.perf_counter() - t0
    ok = rho >= 0.97 and ns <= 0.15 and elapsed < 300 and cyl.n == 1500
    report(6, "half cylinder, Spearman >= 0.97 and stress <= 0.15, n=1500, < 5 min", ok,
           f"Spearman {rho:.4f}, stress {ns:.4f}, kappa {a.kappa}, {elapsed:.1f} s")


def _oracle_stress(delta, labels, moved, alpha):
    total = 0.0
    for l, m in combinations(range(len(labels)), 2):
        if labels[l] != labels[m]:
            d = math.dist(moved[l], moved[m])
            total += (alpha * delta[l, m] - d) ** 2
    return total


def _oracle_delta_pairs(delta, labels, kappa):
    out = np.zeros((kappa, kappa))
    for i in range(kappa):
        for j in range(kappa):
            if i != j:
                vals = [delta[l, m] for l in range(len(labels)) for m in range(len(labels))
                        if labels[l] == i and labels[m] == j]
                out[i, j] = sum(vals) / len(vals)
    return out


def _oracle_recall(delta, emb, k):
    n = len(delta)
    hits = 0
    for i in range(n):
        a = sorted((j for j in range(n) if j != i), key=lambda j: (delta[i, j], j))[:k]
        b = sorted((j for j in range(n) if j != i), key=lambda j: (emb[i, j], j))[:k]
        hits += len(set(a) & set(b))
    return hits / (n * k)


def _oracle_rand(a, b):
    pairs = list(combinations(range(len(a)), 2))
    return sum((a[i] == a[j]) == (b[i] == b[j]) for i, j in pairs) / len(pairs)


def test_criterion_07_oracle_equivalence():
    failures = []
    for seed in range(10):
        rng, dm, delta, a, ce = random_instance(seed)
        n, labels, kappa = dm.n, dm.labels, a.kappa
        ts = [RigidTransform(rng.uniform(0, 2 * np.pi), int(rng.integers(0, 2)), rng.standard_normal(2))
              for _ in range(kappa)]
        alpha = float(rng.uniform(1, 2))
        moved = np.zeros((n, 2))
        for c in range(kappa):
            t = ts[c]
            for r, idx in enumerate(a.members(c)):
                x, y = ce.coords[c][r]
                u = (math.cos(t.theta) * x + math.sin(t.theta) * y, -math.sin(t.theta) * x + math.cos(t.theta) * y)
                moved[idx] = (u[0] + t.v[0], (-u[1] if t.pi_flag else u[1]) + t.v[1])
        checks = {
            "stress": abs(stress(delta, a, ce.coords, ts, alpha) - _oracle_stress(delta.delta, labels, moved, alpha)),
            "Delta_ij": float(np.max(np.abs(cluster_geometry(delta, a, ce).Delta_pairs
                                            - _oracle_delta_pairs(delta.delta, labels, kappa)))),
        }
        g = build_knn_graph(dm, 4)
        edges = [(i, int(j), float(w)) for i in range(n) for j, w in zip(g.indices[i], g.weights[i])]
        from cluster_embed.dissim import bridge_components
        edges += [(int(i), int(j), float(w)) for i, j, w in zip(*bridge_components(g))]
        checks["geodesic"] = float(np.max(np.abs(geodesic_pairwise(g).delta - floyd_warshall(n, edges))))
        y = rng.standard_normal((n, 2))
        emb = brute_euclidean(y)
        iu = np.triu_indices(n, 1)
        checks["spearman"] = abs(spearman(delta, y) - spearman_oracle(delta.delta[iu], emb[iu]))
        num = sum((delta.delta[i, j] - emb[i, j]) ** 2 for i, j in zip(*iu))
        den = sum(delta.delta[i, j] ** 2 for i, j in zip(*iu))
        checks["normalized stress"] = abs(normalized_stress(delta, y) - num / den)
        for name, err in checks.items():
            if not err <= 1e-10:
                failures.append(f"seed {seed} {name} {err:.2e}")
        for k in (1, 5):
            if knn_recall(delta, y, k) != _oracle_recall(delta.delta, emb, k):
                failures.append(f"seed {seed} recall k={k}")
        other = rng.integers(0, 3, n)
        if rand_index(a, other) != _oracle_rand(labels, other):
            failures.append(f"seed {seed} rand")
    report(7, "stress, Delta_ij, geodesic, Spearman, stress, recall, Rand vs brute force, 10 instances",
           not failures, "all match" if not failures else "; ".join(failures))


@pytest.mark.slow
def test_criterion_08_tsne():
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((int(rng.integers(40, 120)), int(rng.integers(2, 6))))
        u = float(rng.uniform(5, 30))
        aff = tsne.calibrate_affinities(x, u)
        d = brute_euclidean(x)
        for i in range(len(x)):
            row = np.delete(d[i], i)
            w = np.exp(-(row ** 2) / (2 * aff.sigma[i] ** 2))
            p = w / w.sum()
            nz = p[p > 0]
            perp = 2 ** float(-np.sum(nz * np.log2(nz)))
            worst = max(worst, abs(perp - u) / u)
    ok_a = worst <= 1e-3
    grad_err = max(tsne.gradient_check(n=10, seed=s) for s in range(3))
    ok_b = grad_err <= 1e-4

    spec = [(60, (0, 0), 1.0), (60, (8, 0), 1.0), (60, (4, 7), 1.0)]
    dm = gen_planar_clusters(spec, seed=0)
    aff = tsne.calibrate_affinities(dm, 30)
    cfg = tsne.TsneConfig(perplexity=30, iters=500, init=tsne.GIVEN)
    y = tsne.tsne_run(aff, cfg, dm.points)
    recall = knn_recall(euclidean_pairwise(dm), y, 10)
    ok_c = recall < 1.0
    report(8, "t-SNE calibration 1e-3*u, gradient 1e-4, 10-NN recall < 1 after 500 iterations",
           ok_a and ok_b and ok_c,
           f"(a) max rel perplexity error {worst:.1e}, (b) gradient error {grad_err:.1e}, (c) recall {recall:.3f}")


def test_criterion_09_loe():
    rng = np.random.default_rng(0)
    y = rng.standard_normal((12, 2))
    d = brute_euclidean(rng.standard_normal((12, 2)))
    np.fill_diagonal(d, np.inf)
    nb = np.argsort(d, axis=1, kind="stable")[:, :3]
    _, grad = loe_loss_and_grad(y, nb, 0.5)
    fd = np.zeros_like(y)
    for idx in np.ndindex(*y.shape):
        yp, ym = y.copy(), y.copy()
        yp[idx] += 1e-5
        ym[idx] -= 1e-5
        fd[idx] = (loe_loss_and_grad(yp, nb, 0.5, False)[0] - loe_loss_and_grad(ym, nb, 0.5, False)[0]) / 2e-5
    grad_err = float(np.abs(grad - fd).max() / np.abs(fd).max())

    x = rng.uniform(0, 10, (80, 2))
    cfg = LoeConfig(k=10, nu=1e-6, epochs=100)
    d = brute_euclidean(x)
    np.fill_diagonal(d, np.inf)
    start_loss, _ = loe_loss_and_grad(x, np.argsort(d, axis=1, kind="stable")[:, :cfg.k], cfg.nu, False)
    out = loe_embed(x, cfg, init=x)
    final_loss = loe_embed.last_history[-1]
    recall = knn_recall(euclidean_pairwise(x), out, cfg.k)
    ok = grad_err <= 1e-4 and start_loss == 0.0 and final_loss == 0.0 and recall == 1.0
    report(9, "LOE gradient 1e-4; at data: loss 0 and recall 1", ok,
           f"gradient error {grad_err:.1e}, final loss {final_loss}, recall {recall}")


def test_criterion_10_gamma_optimality():
    bad = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(5, 40))
        delta = brute_euclidean(rng.standard_normal((m, 4)))
        y = rng.standard_normal((m, 2)) * rng.uniform(0.1, 10)
        g = scale_sync(delta, y)
        iu = np.triu_indices(m, 1)
        dist = brute_euclidean(y)[iu]

        def loss(gamma):
            return float(np.sum((gamma * dist - delta[iu]) ** 2))
        if not (loss(g) <= loss(g * (1 + 1e-3)) and loss(g) <= loss(g * (1 - 1e-3))):
            bad.append(seed)
    report(10, "loss at gamma <= loss at gamma*(1 +- 1e-3), 10 instances", not bad,
           "all instances" if not bad else f"failed seeds {bad}")


def test_criterion_11_pipeline_determinism(tmp_path):
    dm = gen_planar_clusters([(80, (0, 0), 0.7), (60, (6, 1), 0.7), (70, (2, 6), 0.7)], seed=3)
    save_csv(dm, tmp_path / "data.csv")
    cfg = {"input": "data.csv", "label_column": "label", "dissimilarity": {"kind": "euclidean"},
           "clustering": {"method": "kmeans", "k": 3}, "embedding": {"method": "pca"},
           "alignment": {"alpha": "auto"}, "seeds": [7]}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    codes, files = [], []
    for run in ("a", "b"):
        codes.append(main(["pipeline", str(tmp_path / "cfg.json"), "--output-dir", str(tmp_path / run)]))
        files.append([(tmp_path / run / name).read_bytes() for name in ("seed7_embedding.csv", "seed7_metrics.json")])
    ok = codes == [0, 0] and files[0] == files[1]
    report(11, "pipeline writes byte-identical embedding CSV and metrics JSON across runs", ok,
           f"exit codes {codes}")
