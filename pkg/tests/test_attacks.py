import dataclasses
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldp_poison import bitmatrix as bm
from ldp_poison.attacks import (AttackKind, AttackerKnowledge, Metric, ThreatModel, compromise, connection_budget,
                                craft, craft_mga_cc, craft_mga_degree, craft_rna_cc, craft_rna_degree, craft_rva_cc,
                                craft_rva_degree, extend_graph, plan_threat)
from ldp_poison.collect import PrivacyParams, split_budget
from ldp_poison.graph import Graph

EXACT = PrivacyParams.from_budgets(math.inf, math.inf)


def threat(n, m, targets, **kw):
    targets = np.asarray(targets, dtype=np.int64)
    return ThreatModel(n, m / n, len(targets) / n, m, len(targets), targets, **kw)


def knows(cap, params=None):
    return AttackerKnowledge(cap + 0.5, params or split_budget(4))


def rows_of(plan):
    return [bm.row_indices(plan.reports.bits[k], plan.reports.num_nodes) for k in range(plan.m)]


def test_plan_threat_sizes():
    tm = plan_threat(4039, 0.05, 0.05)
    assert (tm.m, tm.r, tm.N) == (202, 202, 4241)
    assert plan_threat(100, 0.05, 0.01).r == 1
    assert (plan_threat(500, 0.1, 0.1, seed=3).targets == plan_threat(500, 0.1, 0.1, seed=3).targets).all()
    assert plan_threat(100, 0.07, 0.07).m == 7
    with pytest.raises(ValueError):
        plan_threat(100, 0.05, 1.5)


def test_connection_budget_floor():
    assert connection_budget(AttackerKnowledge(4.7, EXACT)) == 4
    assert connection_budget(AttackerKnowledge(4.0, EXACT)) == 4


def test_rva_degree_shape():
    tm = threat(9, 1, [0])
    plan = craft_rva_degree(tm, knows(2), 1)
    (row,) = rows_of(plan)
    assert row.size == 2 and 9 not in row


def test_rva_target_hit_rate():
    tm = threat(99, 1, [5])
    hits = sum(bm.get_bit(craft_rva_degree(tm, knows(4), s).reports.bits, 0, 5) for s in range(10_000))
    assert hits / 10_000 == pytest.approx(4 / 99, rel=0.1)


def test_rva_errors_and_empty():
    assert craft_rva_degree(threat(10, 0, [1]), knows(3)).m == 0
    with pytest.raises(ValueError):
        craft_rva_degree(threat(9, 1, [1]), knows(9))


def test_rna_p1_single_target_bit():
    tm = threat(20, 4, [3, 8])
    plan = craft_rna_degree(tm, knows(5, EXACT), 2)
    for row in rows_of(plan):
        assert row.size == 1 and row[0] in (3, 8)
    same = craft_rna_degree(threat(20, 3, [6]), knows(5, EXACT), 0)
    assert all(r.tolist() == [6] for r in rows_of(same))


def test_rna_perturbation_rates():
    pp = PrivacyParams.from_budgets(math.log(9), 1)
    tm = threat(60, 1, [7])
    on_target, others = 0, 0
    for s in range(10_000):
        bits = craft_rna_degree(tm, knows(5, pp), s).reports.bits
        on_target += bm.get_bit(bits, 0, 7)
        others += int(bm.popcount_rows(bits)[0]) - bm.get_bit(bits, 0, 7)
    assert on_target / 10_000 == pytest.approx(0.9, rel=0.02)
    assert others / (10_000 * 59) == pytest.approx(0.1, rel=0.05)


def test_rna_cc_degree_noise_is_laplace():
    pp = split_budget(4)
    tm = threat(30, 1, [2])
    gaps = np.array([craft_rna_cc(tm, knows(5, pp), s).reports.degrees[0] - 1 for s in range(10_000)])
    gaps.sort()
    b = pp.laplace_scale
    cdf = np.where(gaps < 0, 0.5 * np.exp(gaps / b), 1 - 0.5 * np.exp(-gaps / b))
    ecdf = np.arange(1, gaps.size + 1) / gaps.size
    assert np.max(np.abs(cdf - ecdf)) < 1.63 / math.sqrt(gaps.size)  # KS at 1%


def test_mga_degree_min_rule():
    plan = craft_mga_degree(threat(30, 4, [1, 2, 3]), knows(5))
    assert all(r.tolist() == [1, 2, 3] for r in rows_of(plan))
    tm = threat(30, 4, range(10))
    plan = craft_mga_degree(tm, knows(4))
    assert all(r.size == 4 and set(r) <= set(range(10)) for r in rows_of(plan))
    assert int(plan.connections.sum()) == 4 * 4
    assert craft_mga_degree(threat(30, 0, [1]), knows(4)).m == 0


def test_rva_cc_uniform_degrees():
    tm = threat(500, 500, [0])
    d = np.concatenate([craft_rva_cc(tm, knows(0), s).reports.degrees for s in range(200)])
    assert d.mean() == pytest.approx(999 / 2, rel=0.01)
    assert d.min() >= 0 and d.max() <= 999
    empty = craft_rva_cc(tm, knows(0), 0)
    assert bm.popcount_rows(empty.reports.bits).sum() == 0
    assert (craft_rva_cc(tm, knows(3), 9).reports.bits == craft_rva_cc(tm, knows(3), 9).reports.bits).all()


def _triangles_through(plan, tm, target):
    """Triangles at ``target`` made only from crafted fake rows (OR-assembled)."""
    claims = {int(f): set(r.tolist()) for f, r in zip(tm.fake_ids, rows_of(plan))}
    fakes = [f for f, r in claims.items() if target in r]
    return sum(1 for i, a in enumerate(fakes) for b in fakes[i + 1:] if b in claims[a] or a in claims[b])


def test_mga_cc_single_pair():
    tm = threat(18, 2, [4])
    plan = craft_mga_cc(tm, knows(2))
    f1, f2 = tm.fake_ids
    assert [r.tolist() for r in rows_of(plan)] == [[4, f2], [4, f1]]
    assert _triangles_through(plan, tm, 4) == 1


def test_mga_cc_three_targets():
    tm = threat(30, 2, [3, 9, 12])
    plan = craft_mga_cc(tm, knows(4))
    assert sum(_triangles_through(plan, tm, t) for t in tm.targets) == 3


@given(st.integers(2, 40), st.integers(1, 15), st.integers(2, 12), st.integers(0, 10**6))
def test_mga_cc_structure(m, r, cap, seed):
    n = 60
    tm = plan_threat(n, m / n, r / n, seed)
    tm = dataclasses.replace(tm, m=m)
    plan = craft_mga_cc(tm, knows(cap), seed)
    rows = rows_of(plan)
    pair_of = {int(f): k // 2 for k, f in enumerate(tm.fake_ids)}
    for f, row in zip(tm.fake_ids, rows):
        assert row.size <= cap
        for other in row[row >= n]:
            assert pair_of[int(other)] == pair_of[int(f)]
        # every crafted triangle is fake, fake, target
        assert set(row[row < n]) <= set(tm.targets.tolist())


def test_mga_cc_degenerate_warns():
    with pytest.warns(UserWarning):
        plan = craft_mga_cc(threat(20, 1, [2]), knows(3))
    assert plan.metric is Metric.CC and rows_of(plan)[0].tolist() == [2]
    with pytest.warns(UserWarning):
        craft_mga_cc(threat(20, 3, [2]), knows(1))


@pytest.mark.parametrize("kind", list(AttackKind))
@pytest.mark.parametrize("metric", list(Metric))
def test_budget_respected(kind, metric):
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(30, 80))
        cap = int(rng.integers(2, 12))
        tm = plan_threat(n, 0.1, 0.1, seed)
        tm = compromise(tm, 0.1, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plan = craft(kind, metric, tm, knows(cap), seed)
        assert (plan.crafted_counts <= cap).all()
        if kind is not AttackKind.RNA:
            assert (bm.popcount_rows(plan.reports.bits) <= cap).all()


def test_extend_graph_compromised():
    g = Graph.from_edges(10, [(0, 1), (2, 3)])
    tm = compromise(plan_threat(10, 0.3, 0.2, 1), 0.5, 1)
    full = extend_graph(g, tm)
    assert full.num_nodes == 13
    for f, nb in zip(tm.fake_ids, tm.fake_neighbors):
        assert set(full.neighbors(f).tolist()) == set(nb.tolist())
