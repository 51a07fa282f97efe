"""Fake-user injection and crafted reports for RVA, RNA and MGA."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import bitmatrix as bm
from .collect import CollectionMode, PrivacyParams, Reports, perturb_degree, perturb_rows
from .estimator import PerturbedGraph
from .graph import Graph
from .rng import generator


class AttackKind(str, enum.Enum):
    RVA = "rva"
    RNA = "rna"
    MGA = "mga"


class Metric(str, enum.Enum):
    DEGREE = "degree"
    CC = "cc"


class FakeInit(str, enum.Enum):
    FRESH = "fresh"
    COMPROMISED = "compromised"


def _ceil_fraction(fraction: float, n: int) -> int:
    # guard against 0.07 * 100 == 7.000000000000001
    return math.ceil(round(fraction * n, 9))


@dataclass(frozen=True, eq=False)
class ThreatModel:
    """Genuine users are ``0..n-1``; fakes are appended as ``n..n+m-1``."""

    n: int
    beta: float
    gamma: float
    m: int
    r: int
    targets: np.ndarray
    fake_init: FakeInit = FakeInit.FRESH
    # pre-existing genuine neighbours of each fake (compromised mode)
    fake_neighbors: tuple[np.ndarray, ...] | None = None

    @property
    def N(self) -> int:
        return self.n + self.m

    @property
    def fake_ids(self) -> np.ndarray:
        return np.arange(self.n, self.N, dtype=np.int64)


@dataclass(frozen=True)
class AttackerKnowledge:
    avg_perturbed_degree: float
    params: PrivacyParams
    mode: CollectionMode = CollectionMode.SYNCHRONIZED_PAIR

    def __post_init__(self):
        if self.avg_perturbed_degree < 0:
            raise ValueError("average perturbed degree must be non-negative")


@dataclass(frozen=True, eq=False)
class AttackPlan:
    kind: AttackKind
    metric: Metric
    reports: Reports
    # x[u, t] = 1 when fake u's submitted row links target t
    connections: np.ndarray
    cap: int
    # connections each fake chose before any protocol noise
    crafted_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def m(self) -> int:
        return len(self.reports)


def plan_threat(n: int, beta: float, gamma: float, seed: int = 0,
                fake_init: FakeInit | str = FakeInit.FRESH) -> ThreatModel:
    """Size the fake population and draw ``ceil(gamma*n)`` targets among genuine users."""
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    m = _ceil_fraction(beta, n)
    r = _ceil_fraction(gamma, n)
    if r > n:
        raise ValueError("more targets than genuine users")
    targets = np.sort(generator(seed, "threat/targets").choice(n, size=r, replace=False))
    return ThreatModel(n, beta, gamma, m, r, targets.astype(np.int64), FakeInit(fake_init))


def compromise(tm: ThreatModel, density: float, seed: int = 0) -> ThreatModel:
    """Give each fake independent pre-existing edges to genuine users with probability ``density``."""
    rng = generator(seed, "threat/compromise")
    nbrs = tuple(np.flatnonzero(rng.random(tm.n) < density).astype(np.int64) for _ in range(tm.m))
    return replace(tm, fake_init=FakeInit.COMPROMISED, fake_neighbors=nbrs)


def extend_graph(g: Graph, tm: ThreatModel) -> Graph:
    """The ``N``-node graph: genuine edges plus the fakes' initial edges."""
    if g.num_nodes != tm.n:
        raise ValueError(f"graph has {g.num_nodes} nodes, threat model expects {tm.n} genuine users")
    parts = [g.edges()]
    if tm.fake_neighbors is not None:
        for u, nb in zip(tm.fake_ids, tm.fake_neighbors):
            parts.append(np.column_stack([np.full(nb.size, u), nb]))
    labels = None
    if g.labels is not None:
        labels = np.concatenate([g.labels, -1 - np.arange(tm.m)])
    return Graph.from_edges(tm.N, np.concatenate(parts), labels=labels)


def measure_knowledge(pg: PerturbedGraph, params: PrivacyParams,
                      mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR) -> AttackerKnowledge:
    """Average row degree of a perturbed graph, as the attacker would observe it."""
    return AttackerKnowledge(float(pg.row_degrees.mean()), params, CollectionMode(mode))


def connection_budget(k: AttackerKnowledge) -> int:
    return int(math.floor(k.avg_perturbed_degree))


# helpers -----------------------------------------------------------------


def _initial_neighbors(tm: ThreatModel, idx: int) -> np.ndarray:
    if tm.fake_neighbors is None:
        return np.empty(0, dtype=np.int64)
    return tm.fake_neighbors[idx]


def _build(tm: ThreatModel, kind: AttackKind, metric: Metric, rows: list[np.ndarray], cap: int,
           degrees: np.ndarray, crafted_counts, bits: np.ndarray | None = None) -> AttackPlan:
    N = tm.N
    if bits is None:
        bits = np.zeros((tm.m, bm.row_bytes(N)), dtype=np.uint8)
        for k, cols in enumerate(rows):
            bm.set_bits(bits[k], cols, True)
    connections = np.zeros((tm.m, tm.r), dtype=bool)
    if tm.m:
        connections = bm.get_bit(bits, np.arange(tm.m)[:, None], tm.targets[None, :])
    reports = Reports(N, tm.fake_ids, bits, np.asarray(degrees, dtype=float).reshape(tm.m))
    return AttackPlan(kind, metric, reports, connections, cap, np.asarray(crafted_counts, dtype=np.int64))


def _random_others(rng: np.random.Generator, N: int, self_id: int, k: int) -> np.ndarray:
    pick = rng.choice(N - 1, size=k, replace=False)
    return np.sort(pick + (pick >= self_id))


def _consistent_degrees(counts, tm: ThreatModel, k: AttackerKnowledge, seed: int) -> np.ndarray:
    if tm.m == 0:
        return np.zeros(0)
    return np.atleast_1d(perturb_degree(np.asarray(counts, dtype=float), k.params, seed, tm.fake_ids))


def _random_value_rows(tm: ThreatModel, cap: int, seed: int) -> list[np.ndarray]:
    if cap >= tm.N - 1 and tm.m:
        raise ValueError("connection cap leaves no room below N - 1")
    rng = generator(seed, "attack/rva")
    return [_random_others(rng, tm.N, int(u), cap) for u in tm.fake_ids]


def _max_gain_rows(tm: ThreatModel, cap: int, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    per = min(tm.r, cap)
    return [np.sort(rng.choice(tm.targets, size=per, replace=False)) for _ in range(count)]


# degree centrality --------------------------------------------------------


def craft_rva_degree(tm: ThreatModel, k: AttackerKnowledge, seed: int = 0) -> AttackPlan:
    """``cap`` unperturbed links to uniformly random nodes; degree reported consistently."""
    cap = connection_budget(k)
    if cap < 1 and tm.m:
        raise ValueError("RVA needs a connection cap of at least 1")
    rows = _random_value_rows(tm, cap, seed)
    counts = [r.size for r in rows]
    return _build(tm, AttackKind.RVA, Metric.DEGREE, rows, cap,
                  _consistent_degrees(counts, tm, k, seed), counts)


def _craft_rna(tm: ThreatModel, k: AttackerKnowledge, seed: int, metric: Metric) -> AttackPlan:
    if tm.r < 1:
        raise ValueError("RNA needs at least one target")
    cap = connection_budget(k)
    rng = generator(seed, "attack/rna")
    rows = []
    for idx in range(tm.m):
        init = _initial_neighbors(tm, idx)
        if init.size + 1 > cap:
            init = np.sort(rng.choice(init, size=max(cap - 1, 0), replace=False))
        target = tm.targets[rng.integers(tm.r)]
        rows.append(np.union1d(init, [target]))
    counts = [r.size for r in rows]
    crafted = np.zeros((tm.m, bm.row_bytes(tm.N)), dtype=np.uint8)
    for i, cols in enumerate(rows):
        bm.set_bits(crafted[i], cols, True)
    bits = perturb_rows(crafted, tm.fake_ids, tm.N, k.params.p, k.mode, seed) if tm.m else crafted
    return _build(tm, AttackKind.RNA, metric, rows, cap, _consistent_degrees(counts, tm, k, seed),
                  counts, bits=bits)


def craft_rna_degree(tm: ThreatModel, k: AttackerKnowledge, seed: int = 0) -> AttackPlan:
    """One link to a random target, then the whole row goes through the protocol.

    The protocol randomness is the collection's own (keyed by ``seed``), so a
    fake following the protocol perturbs exactly like an honest user would.
    """
    return _craft_rna(tm, k, seed, Metric.DEGREE)


def craft_mga_degree(tm: ThreatModel, k: AttackerKnowledge, seed: int = 0) -> AttackPlan:
    """Each fake links ``min(r, cap)`` targets, unperturbed."""
    cap = connection_budget(k)
    if cap < 1 and tm.m:
        raise ValueError("MGA needs a connection cap of at least 1")
    rows = _max_gain_rows(tm, cap, generator(seed, "attack/mga"), tm.m)
    counts = [r.size for r in rows]
    return _build(tm, AttackKind.MGA, Metric.DEGREE, rows, cap,
                  _consistent_degrees(counts, tm, k, seed), counts)


# clustering coefficient ---------------------------------------------------


def craft_rva_cc(tm: ThreatModel, k: AttackerKnowledge, seed: int = 0) -> AttackPlan:
    """Random unperturbed links as in RVA-degree, degree drawn from ``U[0, N-1]``."""
    cap = connection_budget(k)
    rows = _random_value_rows(tm, cap, seed)
    degrees = generator(seed, "attack/rva/degree").uniform(0, tm.N - 1, size=tm.m)
    return _build(tm, AttackKind.RVA, Metric.CC, rows, cap, degrees, [r.size for r in rows])


def craft_rna_cc(tm: ThreatModel, k: AttackerKnowledge, seed: int = 0) -> AttackPlan:
    return _craft_rna(tm, k, seed, Metric.CC)


def craft_mga_cc(tm: ThreatModel, k: AttackerKnowledge, seed: int = 0) -> AttackPlan:
    """Pair the fakes, link each pair, then link both members to the same
    ``cap - 1`` targets taken round-robin over ``T``.

    Every pair therefore plants one triangle per shared target.  An odd fake
    out behaves like MGA-degree.
    """
    cap = connection_budget(k)
    if cap < 2 or tm.m < 2:
        warnings.warn("MGA-cc needs cap >= 2 and m >= 2; falling back to MGA-degree rows", stacklevel=2)
        plan = craft_mga_degree(tm, k, seed) if tm.m else _build(tm, AttackKind.MGA, Metric.CC, [], cap, [], [])
        return replace(plan, metric=Metric.CC)
    fakes = tm.fake_ids
    per_pair = min(cap - 1, tm.r)
    rows: list[np.ndarray] = []
    for pair in range(tm.m // 2):
        start = pair * (cap - 1)
        shared = tm.targets[(start + np.arange(per_pair)) % tm.r]
        a, b = fakes[2 * pair], fakes[2 * pair + 1]
        rows.append(np.sort(np.append(shared, b)))
        rows.append(np.sort(np.append(shared, a)))
    if tm.m % 2:
        rows += _max_gain_rows(tm, cap, generator(seed, "attack/mga"), 1)
    counts = [r.size for r in rows]
    return _build(tm, AttackKind.MGA, Metric.CC, rows, cap, _consistent_degrees(counts, tm, k, seed), counts)


CRAFTERS = {
    (AttackKind.RVA, Metric.DEGREE): craft_rva_degree,
    (AttackKind.RNA, Metric.DEGREE): craft_rna_degree,
    (AttackKind.MGA, Metric.DEGREE): craft_mga_degree,
    (AttackKind.RVA, Metric.CC): craft_rva_cc,
    (AttackKind.RNA, Metric.CC): craft_rna_cc,
    (AttackKind.MGA, Metric.CC): craft_mga_cc,
}


def craft(kind: AttackKind | str, metric: Metric | str, tm: ThreatModel, k: AttackerKnowledge,
          seed: int = 0) -> AttackPlan:
    return CRAFTERS[AttackKind(kind), Metric(metric)](tm, k, seed)
