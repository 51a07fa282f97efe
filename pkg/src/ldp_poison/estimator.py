"""Collector side: assemble the perturbed graph and estimate per-node metrics."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

import numpy as np

from . import bitmatrix as bm
from .collect import CollectionMode, Reports
from .graph import clustering_from


class MetricKind(str, enum.Enum):
    DEGREE_CENTRALITY = "degree_centrality"
    CLUSTERING_COEFFICIENT = "clustering_coefficient"


@dataclass(frozen=True, eq=False)
class PerturbedGraph:
    num_nodes: int
    bits: np.ndarray
    row_degrees: np.ndarray
    edge_density: float

    def dense(self) -> np.ndarray:
        return bm.unpack(self.bits, self.num_nodes)


@dataclass(frozen=True)
class TriangleEstimate:
    raw: int
    calibrated: float
    case_terms: tuple[float, float, float]


@dataclass(frozen=True)
class MetricEstimate:
    node: int
    value: float
    kind: MetricKind
    raw_value: float | None = None
    raw_tau: int | None = None
    calibrated_tau: float | None = None
    d_tilde: float | None = None


def _check_p(p: float) -> None:
    if not p > 0.5:
        raise ValueError(f"calibration is singular for p <= 0.5 (p={p})")


def assemble_perturbed_graph(reports: Reports,
                             mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR) -> PerturbedGraph:
    """Edge ``(i, j)`` is kept when either endpoint claims it.

    Both collection modes use the same OR rule; in synchronized-pair mode the
    honest rows already agree so only one-sided claims change anything.
    """
    CollectionMode(mode)
    r = reports.ordered()
    n = r.num_nodes
    if r.bits.shape != (n, bm.row_bytes(n)):
        raise ValueError("report rows do not match the node count")
    bits = bm.symmetrize_or(r.bits, n)
    deg = bm.popcount_rows(bits)
    density = float(deg.sum()) / (n * (n - 1)) if n > 1 else 0.0
    return PerturbedGraph(n, bits, deg, density)


def estimate_degree(pg: PerturbedGraph, p: float, i=None):
    """Unbiased randomized-response inversion of the row degree."""
    _check_p(p)
    raw = pg.row_degrees if i is None else pg.row_degrees[i]
    est = (raw - (pg.num_nodes - 1) * (1 - p)) / (2 * p - 1)
    return float(est) if np.ndim(est) == 0 else est


def estimate_degree_centrality(pg: PerturbedGraph, p: float, i: int) -> MetricEstimate:
    if pg.num_nodes < 2:
        raise ValueError("degree centrality needs at least two nodes")
    value = estimate_degree(pg, p, i) / (pg.num_nodes - 1)
    return MetricEstimate(int(i), value, MetricKind.DEGREE_CENTRALITY, raw_value=value)


def perturbed_triangle_count(pg: PerturbedGraph, i) -> int | np.ndarray:
    out = bm.triangles_at(pg.bits, pg.num_nodes, i)
    return int(out[0]) if np.ndim(i) == 0 else out


def triangle_case_terms(d, n: int, p: float, theta: float):
    """Bias terms of the perturbed triangle count at a node of degree ``d``,
    split by whether both, one, or neither of the other two corners is a true
    neighbour."""
    d = np.asarray(d, dtype=float)
    q = 1 - p
    both = 0.5 * d * (d - 1) * p * p * q
    one = d * (n - d - 1) * p * q * theta
    neither = 0.5 * (n - d - 1) * (n - d - 2) * q * q * theta
    return both, one, neither


def calibrate_triangle_count(tau_tilde, d_tilde, n: int, p: float, theta: float):
    """Bias-corrected triangle count; affine in ``tau_tilde`` and possibly negative."""
    _check_p(p)
    both, one, neither = triangle_case_terms(d_tilde, n, p, theta)
    out = (np.asarray(tau_tilde, dtype=float) - both - one - neither) / (p * p * (2 * p - 1))
    return float(out) if np.ndim(out) == 0 else out


def clustering_estimates(pg: PerturbedGraph, reports: Reports, p: float, nodes):
    """Raw (unclamped) clustering estimates for ``nodes`` plus their ingredients.

    The reported degree is floored at 2 in the denominator only.
    """
    nodes = np.atleast_1d(np.asarray(nodes, dtype=np.int64))
    r = reports.ordered()
    d_tilde = r.degrees[nodes]
    tau_raw = bm.triangles_at(pg.bits, pg.num_nodes, nodes)
    tau_cal = np.atleast_1d(calibrate_triangle_count(tau_raw, d_tilde, pg.num_nodes, p, pg.edge_density))
    d_den = np.maximum(d_tilde, 2.0)
    raw = clustering_from(tau_cal, d_den)
    return raw, tau_raw, tau_cal, d_tilde


def estimate_clustering_coefficient(pg: PerturbedGraph, reports: Reports, p: float, i: int) -> MetricEstimate:
    raw, tau_raw, tau_cal, d_tilde = clustering_estimates(pg, reports, p, [i])
    return MetricEstimate(int(i), float(np.clip(raw[0], 0.0, 1.0)), MetricKind.CLUSTERING_COEFFICIENT,
                          raw_value=float(raw[0]), raw_tau=int(tau_raw[0]),
                          calibrated_tau=float(tau_cal[0]), d_tilde=float(d_tilde[0]))


def triangle_estimate(pg: PerturbedGraph, reports: Reports, p: float, i: int) -> TriangleEstimate:
    d = float(reports.ordered().degrees[i])
    raw = perturbed_triangle_count(pg, i)
    terms = tuple(float(t) for t in triangle_case_terms(d, pg.num_nodes, p, pg.edge_density))
    return TriangleEstimate(raw, calibrate_triangle_count(raw, d, pg.num_nodes, p, pg.edge_density), terms)


def estimates_to_csv(estimates: list[MetricEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_id", "kind", "value", "raw_tau", "calibrated_tau", "d_tilde"])
    for e in estimates:
        w.writerow([e.node, e.kind.value, repr(e.value),
                    "" if e.raw_tau is None else e.raw_tau,
                    "" if e.calibrated_tau is None else repr(e.calibrated_tau),
                    "" if e.d_tilde is None else repr(e.d_tilde)])
    return buf.getvalue()
