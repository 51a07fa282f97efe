"""Attack gain: empirical before/after measurement and the closed-form MGA gains."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .attacks import AttackKind, AttackPlan, Metric, ThreatModel, extend_graph
from .collect import CollectionMode, PrivacyParams, Reports, collect_reports
from .estimator import PerturbedGraph, assemble_perturbed_graph, clustering_estimates, estimate_degree
from .graph import Graph


@dataclass(frozen=True, eq=False)
class GainReport:
    metric: Metric
    attack: AttackKind | None
    targets: np.ndarray
    before: np.ndarray
    after: np.ndarray

    @property
    def deltas(self) -> np.ndarray:
        return np.abs(self.after - self.before)

    @property
    def total(self) -> float:
        return float(self.deltas.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target", "before", "after", "delta"])
        for t, b, a, d in zip(self.targets, self.before, self.after, self.deltas):
            w.writerow([int(t), repr(float(b)), repr(float(a)), repr(float(d))])
        w.writerow(["total", "", "", repr(self.total)])
        return buf.getvalue()


def target_metric(reports: Reports, targets: np.ndarray, metric: Metric | str, p: float,
                  mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR,
                  pg: PerturbedGraph | None = None) -> np.ndarray:
    """Collector-side estimates of ``metric`` at ``targets`` (raw, unclamped)."""
    pg = assemble_perturbed_graph(reports, mode) if pg is None else pg
    if Metric(metric) is Metric.DEGREE:
        return estimate_degree(pg, p, targets) / (pg.num_nodes - 1)
    raw, *_ = clustering_estimates(pg, reports, p, targets)
    return raw


def gain_between(baseline: Reports, attacked: Reports, targets: np.ndarray, metric: Metric | str,
                 p: float, mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR,
                 attack: AttackKind | None = None) -> GainReport:
    before = target_metric(baseline, targets, metric, p, mode)
    after = target_metric(attacked, targets, metric, p, mode)
    return GainReport(Metric(metric), attack, np.asarray(targets), np.asarray(before), np.asarray(after))


def baseline_reports(g: Graph, tm: ThreatModel, params: PrivacyParams, seed: int,
                     mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR,
                     genuine_only: bool = False, paired: bool = True) -> Reports:
    """Reports of the unattacked system.

    By default fakes take part honestly, so both runs have ``N`` users.  With
    ``genuine_only`` only the ``n`` genuine users report.  Unpaired runs draw
    fresh protocol randomness for the baseline.
    """
    seed = seed if paired else _unpaired(seed)
    if genuine_only:
        return collect_reports(g if g.num_nodes == tm.n else _genuine_part(g, tm), params, mode, seed)
    return collect_reports(_full_graph(g, tm), params, mode, seed)


def empirical_gain(g: Graph, tm: ThreatModel, plan: AttackPlan, params: PrivacyParams, seed: int = 0, *,
                   mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR,
                   genuine_only_baseline: bool = False, paired: bool = True,
                   baseline: Reports | None = None, honest: Reports | None = None) -> GainReport:
    """Gain of ``plan`` measured as the change of the collector's target estimates.

    ``honest`` (the attack run's genuine reports, normally the paired baseline)
    and ``baseline`` can be passed in to avoid recollecting.
    """
    full = _full_graph(g, tm)
    if plan.reports.num_nodes != tm.N:
        raise ValueError("plan rows do not match N")
    if honest is None:
        honest = collect_reports(full, params, mode, seed)
    if baseline is None:
        baseline = honest if paired and not genuine_only_baseline else baseline_reports(
            full, tm, params, seed, mode, genuine_only_baseline, paired)
    attacked = honest.replace(plan.reports)
    return gain_between(baseline, attacked, tm.targets, plan.metric, params.p, mode, plan.kind)


def _full_graph(g: Graph, tm: ThreatModel) -> Graph:
    if g.num_nodes == tm.N:
        return g
    if g.num_nodes == tm.n:
        return extend_graph(g, tm)
    raise ValueError(f"graph has {g.num_nodes} nodes; expected n={tm.n} or N={tm.N}")


def _genuine_part(g: Graph, tm: ThreatModel) -> Graph:
    e = g.edges()
    e = e[(e < tm.n).all(axis=1)]
    return Graph.from_edges(tm.n, e)


def _unpaired(seed: int) -> int:
    return (int(seed) * 0x9E3779B1 + 0x7F4A7C15) % (1 << 63)


# closed forms -----------------------------------------------------------


def theoretical_gain_degree(m: int, r: int, N: int, avg_perturbed_degree: float) -> float:
    """Closed-form MGA gain on degree centrality."""
    if N < 2 or r < 1:
        raise ValueError("need N >= 2 and r >= 1")
    d = avg_perturbed_degree
    return (m * r / (N - 1)) * (min(r, math.floor(d)) / r - d / (N - 1))


def theoretical_gain_cc(m: int, r: int, N: int, p: float, avg_perturbed_degree: float) -> float:
    """Closed-form MGA gain on the clustering coefficient."""
    d = avg_perturbed_degree
    if not p > 0.5:
        raise ValueError("p must exceed 0.5")
    if not d > 1:
        raise ValueError("average perturbed degree must exceed 1")
    q = d / (N - 1)
    denom = 2 * q * (1 - q) ** 2 + q * q * (1 - q) + 3 * (1 - q) ** 3
    return r * (2 / (p * p * (2 * p - 1))) * (1 / (d * (d - 1))) * (m / denom)
