"""Acceptance checks.  Each test prints one PASS/FAIL line, then asserts.

Facebook-based criteria use the real ego-Facebook edge list when it is in the
dataset cache (``LDP_POISON_CACHE``); otherwise they run on the offline
stand-in with the same vertex and edge counts, and the line says SURROGATE.
"""

import dataclasses
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import random_edges
from ldp_poison import bitmatrix as bm
from ldp_poison.attacks import compromise, craft, extend_graph, measure_knowledge, plan_threat
from ldp_poison.collect import PrivacyParams, collect_reports, perturb_adjacency, perturbation_probability, split_budget
from ldp_poison.datasets import cached
from ldp_poison.estimator import assemble_perturbed_graph, clustering_estimates, estimate_degree
from ldp_poison.gain import empirical_gain, theoretical_gain_cc, theoretical_gain_degree
from ldp_poison.graph import Graph, degree_centrality, local_clustering_coefficient, triangle_counts
from ldp_poison import harness as H

DATASET = "facebook" if cached("facebook") else "facebook-surrogate"
LABEL = "facebook" if DATASET == "facebook" else "facebook-surrogate SURROGATE"
BETAS = [0.001, 0.005, 0.01, 0.05, 0.1]
THRESHOLDS = [50, 100, 150, 200, 250, 300]


def verdict(number, ok, detail, capsys):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def mean_gain(rows, field="gain_empirical"):
    vals = np.array([getattr(r, field) for r in rows], dtype=float)
    return vals.mean(), vals.std()


def defaults(**kw):
    return H.ExperimentConfig(dataset=DATASET, **kw)


def at_most_one_inversion(means, stds):
    """Non-decreasing, forgiving one dip that stays within one std of the previous point."""
    dips = [(k, means[k] - means[k + 1]) for k in range(len(means) - 1) if means[k + 1] < means[k]]
    if not dips:
        return True
    if len(dips) > 1:
        return False
    k, drop = dips[0]
    return drop <= max(stds[k], stds[k + 1])


# 1 ---------------------------------------------------------------------------


def test_criterion_1_exact_metrics(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    bad = 0
    for _ in range(50):
        n = int(rng.integers(2, 51))
        edges = random_edges(rng, n, float(rng.uniform(0, 0.6)))
        g = Graph.from_edges(n, edges)
        adj = oracles.adjacency_sets(n, edges.tolist())
        tau = triangle_counts(g)
        for i in range(n):
            bad += degree_centrality(g, i) != oracles.degree_centrality(adj, i)
            bad += int(tau[i]) != oracles.triangles(adj, i)
            bad += local_clustering_coefficient(g, i) != oracles.clustering(adj, i)
    dt = time.perf_counter() - t0
    verdict(1, bad == 0 and dt < 10, f"{bad} mismatches against brute force on 50 graphs, {dt:.2f}s (< 10s)", capsys)


# 2 ---------------------------------------------------------------------------


def test_criterion_2_privacy_ratio(capsys):
    eps1 = 1.0
    p = perturbation_probability(eps1)
    analytic = p / (1 - p)
    # 1415 nodes give 1,000,405 unordered pairs, each one randomized-response trial
    n = 1415
    iu, ju = np.triu_indices(n, 1)
    full = Graph.from_dense(np.ones((n, n), bool))
    empty = Graph.from_edges(n, [])
    ones_from_one = bm.unpack(perturb_adjacency(full, p, "synchronized-pair", 21), n)[iu, ju].mean()
    ones_from_zero = bm.unpack(perturb_adjacency(empty, p, "synchronized-pair", 22), n)[iu, ju].mean()
    empirical = ones_from_one / ones_from_zero
    ok = math.isclose(analytic, math.e, rel_tol=1e-12) and abs(empirical / math.e - 1) < 0.05
    verdict(2, ok, f"analytic ratio {analytic:.12f} vs e^1; empirical {empirical:.4f} over {iu.size} trials (within 5%)",
            capsys)


# 3 ---------------------------------------------------------------------------


def test_criterion_3_calibration(capsys):
    t0 = time.perf_counter()
    exact = PrivacyParams.from_budgets(math.inf, math.inf)
    rng = np.random.default_rng(3)
    identity_ok = True
    for _ in range(20):
        n = int(rng.integers(3, 61))
        g = Graph.from_edges(n, random_edges(rng, n, float(rng.uniform(0.05, 0.5))))
        r = collect_reports(g, exact)
        pg = assemble_perturbed_graph(r)
        raw, _, tau_cal, _ = clustering_estimates(pg, r, 1.0, np.arange(n))
        cc = np.array([local_clustering_coefficient(g, i) for i in range(n)])
        identity_ok &= bool(np.allclose(tau_cal, triangle_counts(g), atol=1e-9) and np.allclose(raw, cc, atol=1e-12)
                            and np.allclose(estimate_degree(pg, 1.0), g.degrees))

    g = Graph.from_edges(200, random_edges(np.random.default_rng(33), 200, 0.05))
    params = PrivacyParams.from_budgets(4.0, 4.0)
    true_tau = triangle_counts(g)
    nodes = np.flatnonzero(true_tau >= 5)
    acc = np.zeros(nodes.size)
    for s in range(200):
        r = collect_reports(g, params, seed=s)
        acc += clustering_estimates(assemble_perturbed_graph(r), r, params.p, nodes)[2]
    mean_tau = acc / 200
    tol = np.maximum(0.1 * true_tau[nodes], 2)
    worst = np.max(np.abs(mean_tau - true_tau[nodes]) - tol)
    ok_unbiased = bool(nodes.size and worst <= 0)
    dt = time.perf_counter() - t0
    verdict(3, identity_ok and ok_unbiased and dt < 300,
            f"p=1 identity on 20 graphs: {identity_ok}; eps1=4 mean calibrated tau within max(10%, 2) at "
            f"{nodes.size} nodes with tau>=5: {ok_unbiased} (worst excess {worst:.3f}); {dt:.1f}s (< 300s)", capsys)


# 4 ---------------------------------------------------------------------------


def test_criterion_4_theorem1_closed_form(capsys):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(10, 10_000))
        m, r = int(rng.integers(1, N)), int(rng.integers(1, N))
        d = float(rng.uniform(0, N - 1))
        want = float(oracles.gain_degree(m, r, N, d))
        got = theoretical_gain_degree(m, r, N, d)
        worst = max(worst, abs(got - want) / abs(want) if want else abs(got))
    worked = theoretical_gain_degree(5, 10, 100, 4.0)
    ok = worst < 1e-9 and abs(worked - 0.1816141) < 5e-8
    verdict(4, ok, f"worst relative error vs 50-digit oracle {worst:.2e} (< 1e-9); worked value {worked:.7f}", capsys)


# 5 ---------------------------------------------------------------------------


def test_criterion_5_theorem1_simulation(capsys):
    t0 = time.perf_counter()
    n, m, r = 950, 50, 50
    g = Graph.from_edges(n, random_edges(np.random.default_rng(5), n, 0.01))
    density = 2 * g.edge_count / (n * (n - 1))
    params = split_budget(4.0)
    gains, theory = [], []
    for s in range(20):
        tm = compromise(plan_threat(n, m / n, r / n, s, "compromised"), density, s)
        full = extend_graph(g, tm)
        honest = collect_reports(full, params, seed=s)
        k = measure_knowledge(assemble_perturbed_graph(honest), params)
        plan = craft("mga", "degree", tm, k, s)
        gains.append(empirical_gain(full, tm, plan, params, s, honest=honest).total)
        theory.append(theoretical_gain_degree(tm.m, tm.r, tm.N, k.avg_perturbed_degree))
    factor = 1 / (2 * params.p - 1)
    expected = float(np.mean(theory)) * factor
    emp = float(np.mean(gains))
    dt = time.perf_counter() - t0
    ratio = emp / expected
    verdict(5, abs(ratio - 1) <= 0.15 and dt < 600,
            f"empirical {emp:.4f} vs theorem x 1/(2p-1) = {expected:.4f} (factor {factor:.4f}); ratio {ratio:.3f} "
            f"(within 15%); {dt:.1f}s", capsys)


# 6 ---------------------------------------------------------------------------


def test_criterion_6_theorem2(capsys):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(10, 10_000))
        m, r = int(rng.integers(1, N)), int(rng.integers(1, N))
        d = float(rng.uniform(1.01, N - 1))
        p = float(rng.uniform(0.501, 1.0))
        want = float(oracles.gain_cc(m, r, N, p, d))
        worst = max(worst, abs(theoretical_gain_cc(m, r, N, p, d) - want) / want)
    worked = theoretical_gain_cc(5, 10, 100, 0.9, 4.0)

    n = 480
    g = Graph.from_edges(n, random_edges(np.random.default_rng(66), n, 0.03))
    params = split_budget(4.0)

    def point(m, r):
        emp, th = [], []
        for s in range(3):
            tm = plan_threat(n, m / n, r / n, s)
            full = extend_graph(g, tm)
            honest = collect_reports(full, params, seed=s)
            k = measure_knowledge(assemble_perturbed_graph(honest), params)
            emp.append(empirical_gain(full, tm, craft("mga", "cc", tm, k, s), params, s, honest=honest).total)
            th.append(theoretical_gain_cc(tm.m, tm.r, tm.N, params.p, k.avg_perturbed_degree))
        return np.mean(emp), np.mean(th)

    grid = [4, 8, 16, 32]
    by_m = [point(m, 10) for m in grid]
    by_r = [point(10, r) for r in grid]
    inc = lambda xs: all(b > a for a, b in zip(xs, xs[1:]))
    mono = all(inc([p[i] for p in series]) for series in (by_m, by_r) for i in (0, 1))
    ok = worst < 1e-9 and abs(worked - 4.7161) < 5e-5 and mono
    verdict(6, ok, f"worst relative error {worst:.2e}; worked value {worked:.4f}; empirical and closed form increasing "
                   f"in m and r on N=500: {mono}", capsys)


# 7 ---------------------------------------------------------------------------


def test_criterion_7_attack_ordering(capsys):
    t0 = time.perf_counter()
    means = {}
    for metric in ("degree", "cc"):
        for attack in ("mga", "rva", "rna"):
            means[metric, attack] = mean_gain(H.run_trials(defaults(metric=metric, attack=attack)))[0]
    deg = means["degree", "mga"] > means["degree", "rva"] > means["degree", "rna"]
    cc = means["cc", "mga"] > means["cc", "rva"] >= means["cc", "rna"]
    dt = time.perf_counter() - t0
    detail = ", ".join(f"{m}/{a}={v:.4g}" for (m, a), v in means.items())
    verdict(7, deg and cc and dt < 1800, f"[{LABEL}] {detail}; {dt:.0f}s", capsys)


# 8 ---------------------------------------------------------------------------


def test_criterion_8_monotonicity(capsys):
    t0 = time.perf_counter()
    parts, ok = [], True
    curves = {}
    for metric in ("degree", "cc"):
        for param in ("beta", "gamma"):
            rows = H.run_sweep(defaults(metric=metric), param, BETAS)
            stats = [mean_gain(rows[k:k + 10]) for k in range(0, len(rows), 10)]
            means, stds = [s[0] for s in stats], [s[1] for s in stats]
            curves[metric, param] = means
            good = at_most_one_inversion(means, stds)
            ok &= good
            parts.append(f"{metric}/{param} {'ok' if good else 'NOT monotone'} " + "/".join(f"{v:.4g}" for v in means))
    cc_b = curves["cc", "beta"]
    plateau = abs(cc_b[4] - cc_b[3]) <= 0.10 * cc_b[3]
    ok &= plateau
    parts.append(f"MGA-cc plateau: gain(beta=0.1)/gain(beta=0.05) = {cc_b[4] / cc_b[3]:.3f} (need within 10%)")
    verdict(8, ok, f"[{LABEL}] " + "; ".join(parts) + f"; {time.perf_counter() - t0:.0f}s", capsys)


# 9 ---------------------------------------------------------------------------


def test_criterion_9_countermeasures(capsys):
    t0 = time.perf_counter()
    # itemset detection against MGA-degree; pairs only, noise-aware support
    base = defaults(metric="degree", attack="mga", defense="itemsets", max_itemset_size=2)
    rows = H.run_sweep(base, "threshold", THRESHOLDS)
    no_def = mean_gain(rows[:10])[0]
    post = [mean_gain(rows[k:k + 10], "post_defense_gain")[0] for k in range(0, len(rows), 10)]
    dips = min(post) < no_def
    best = int(np.argmin(post))
    u_shape = 0 < best < len(post) - 1
    itemset_part = (f"itemsets/MGA-degree no-defense {no_def:.4g}, post by threshold "
                    + "/".join(f"{v:.4g}" for v in post) + f" (dip below no-defense: {dips}, interior minimum: {u_shape})")

    # degree-gap detection against RVA; random reported degrees only arise for the cc variant
    gap_ok, gap_parts = True, []
    for beta in BETAS + [0.15]:
        rows = H.run_trials(defaults(metric="cc", attack="rva", beta=beta, defense="degree_gap"))
        pre, after = mean_gain(rows)[0], mean_gain(rows, "post_defense_gain")[0]
        gap_ok &= after < pre
        gap_parts.append(f"{beta}:{pre:.4g}->{after:.4g}")
    naive = mean_gain(H.run_trials(defaults(metric="cc", attack="rva", defense="naive_extremes")),
                      "post_defense_gain")[0]
    detect = mean_gain(H.run_trials(defaults(metric="cc", attack="rva", defense="degree_gap")), "post_defense_gain")[0]
    naive_ok = naive > detect
    ok = dips and u_shape and gap_ok and naive_ok
    verdict(9, ok, f"[{LABEL}] {itemset_part}; degree-gap on RVA-cc reduces gain at every beta: {gap_ok} "
                   f"({', '.join(gap_parts)}); Naive2 post {naive:.4g} > Detect2 post {detect:.4g}: {naive_ok}; "
                   f"{time.perf_counter() - t0:.0f}s", capsys)


# 10 --------------------------------------------------------------------------


def test_criterion_10_determinism(capsys, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, "-m", "ldp_poison.cli", "sweep", "--dataset", DATASET, "--trials", "2",
                        "--param", "beta", "--values", "0.01,0.05", "--defense", "degree_gap",
                        "--out", str(out)], check=True)
        outs.append(out.read_bytes())
    same = outs[0] == outs[1] and len(outs[0].splitlines()) == 5
    verdict(10, same, f"[{LABEL}] two separate processes wrote {len(outs[0])} identical bytes: {same}", capsys)
