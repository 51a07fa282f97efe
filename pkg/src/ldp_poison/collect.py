"""User-side protocol: budget split, randomized response on adjacency rows,
Laplace noise on degrees, and the report containers that travel to the collector."""

from __future__ import annotations

import csv
import enum
import io
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence

import numpy as np

from . import bitmatrix as bm
from .graph import Graph
from .rng import hash_uniform, stream_key

ADJ_TAG = "adjacency"
DEG_TAG = "degree"


class CollectionMode(str, enum.Enum):
    # one keep/flip trial per unordered pair, shared by both endpoints
    SYNCHRONIZED_PAIR = "synchronized-pair"
    # every directed bit perturbed independently; collector ORs the two claims
    DUAL_REPORT_OR = "dual-report-or"


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    alpha: float
    epsilon1: float
    epsilon2: float
    p: float
    laplace_scale: float

    @property
    def sigma(self) -> float:
        """Standard deviation of the degree noise."""
        return math.sqrt(2) * self.laplace_scale

    @classmethod
    def from_budgets(cls, epsilon1: float, epsilon2: float, *, degree_sensitivity: float = 2.0) -> "PrivacyParams":
        """Params from explicit per-channel budgets; either may be ``math.inf``."""
        total = epsilon1 + epsilon2
        alpha = epsilon1 / total if math.isfinite(total) and total > 0 else 0.5
        scale = degree_sensitivity / epsilon2 if epsilon2 > 0 else math.inf
        return cls(total, alpha, epsilon1, epsilon2, perturbation_probability(epsilon1), scale)


def perturbation_probability(epsilon1: float) -> float:
    """Keep probability ``e^eps1 / (1 + e^eps1)`` of binary randomized response."""
    if epsilon1 < 0:
        raise ValueError("epsilon1 must be non-negative")
    return 1.0 / (1.0 + math.exp(-epsilon1))


def split_budget(epsilon: float, alpha: float = 0.5, *, degree_sensitivity: float = 2.0) -> PrivacyParams:
    """Split ``epsilon`` into an adjacency share ``alpha*epsilon`` and a degree share.

    The Laplace scale is ``degree_sensitivity / epsilon2``; with ``epsilon2 == 0``
    it is infinite and :func:`perturb_degree` refuses to run.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    e1 = alpha * epsilon
    e2 = epsilon - e1
    scale = degree_sensitivity / e2 if e2 > 0 else math.inf
    return PrivacyParams(epsilon, alpha, e1, e2, perturbation_probability(e1), scale)


def _check_p(p: float) -> None:
    if not 0.5 < p <= 1:
        raise ValueError(f"keep probability must lie in (0.5, 1], got {p}")


def flip_mask(rows: np.ndarray, n: int, p: float, mode: CollectionMode | str, seed: int) -> np.ndarray:
    """Dense ``len(rows) x n`` mask, True where the protocol flips bit ``(i, j)``.

    In synchronized-pair mode the trial for ``(i, j)`` is keyed by the unordered
    pair, so any two rows agree on their shared bit no matter who computes it.
    """
    mode = CollectionMode(mode)
    rows = np.asarray(rows, dtype=np.int64)
    if p == 1:
        return np.zeros((rows.size, n), dtype=bool)
    cols = np.arange(n, dtype=np.int64)[None, :]
    i = rows[:, None]
    if mode is CollectionMode.SYNCHRONIZED_PAIR:
        u = hash_uniform(stream_key(seed, ADJ_TAG), np.minimum(i, cols), np.maximum(i, cols))
    else:
        u = hash_uniform(stream_key(seed, ADJ_TAG + "/directed"), i, cols)
    return u >= p


def perturb_rows(bits: np.ndarray, rows: np.ndarray, n: int, p: float,
                 mode: CollectionMode | str, seed: int) -> np.ndarray:
    """Randomized response applied to packed rows ``bits`` belonging to nodes ``rows``."""
    _check_p(p)
    rows = np.asarray(rows, dtype=np.int64)
    out = np.empty_like(bits)
    for a in range(0, rows.size, bm.BLOCK):
        blk = rows[a : a + bm.BLOCK]
        dense = bm.unpack(bits[a : a + bm.BLOCK], n) ^ flip_mask(blk, n, p, mode, seed)
        dense[np.arange(blk.size), blk] = False
        out[a : a + bm.BLOCK] = bm.pack(dense)
    return out


def perturb_adjacency(g: Graph, p: float, mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR,
                      seed: int = 0) -> np.ndarray:
    """Packed perturbed adjacency rows, one per node."""
    return perturb_rows(g.bits, np.arange(g.num_nodes), g.num_nodes, p, mode, seed)


def laplace_noise(nodes, scale: float, seed: int) -> np.ndarray:
    u = hash_uniform(stream_key(seed, DEG_TAG), np.asarray(nodes, dtype=np.int64)) - 0.5
    return -scale * np.sign(u) * np.log1p(-2 * np.abs(u))


def perturb_degree(d, params: PrivacyParams, seed: int = 0, node=0):
    """``d + Lap(2/epsilon2)``; the draw is keyed by ``(seed, node)``."""
    if params.epsilon2 <= 0:
        raise ValueError("degree perturbation needs epsilon2 > 0")
    noisy = np.asarray(d, dtype=float) + laplace_noise(node, params.laplace_scale, seed)
    return float(noisy) if noisy.ndim == 0 else noisy


@dataclass(frozen=True)
class Report:
    node: int
    perturbed_bits: np.ndarray
    perturbed_degree: float


@dataclass(frozen=True, eq=False)
class Reports:
    """Reports of a set of users, stored as packed rows plus a degree vector.

    ``nodes[k]`` is the sender of row ``k``; a full collection has
    ``nodes == arange(num_nodes)``.
    """

    num_nodes: int
    nodes: np.ndarray
    bits: np.ndarray
    degrees: np.ndarray

    def __len__(self) -> int:
        return int(self.nodes.size)

    def __getitem__(self, k: int) -> Report:
        return Report(int(self.nodes[k]), bm.unpack(self.bits[k], self.num_nodes), float(self.degrees[k]))

    def __iter__(self) -> Iterator[Report]:
        return (self[k] for k in range(len(self)))

    @classmethod
    def from_list(cls, reports: Sequence[Report], num_nodes: int | None = None) -> "Reports":
        if not reports:
            raise ValueError("no reports")
        n = num_nodes if num_nodes is not None else len(reports[0].perturbed_bits)
        if any(len(r.perturbed_bits) != n for r in reports):
            raise ValueError("ragged report rows")
        return cls(n, np.array([r.node for r in reports], dtype=np.int64),
                   bm.pack(np.stack([np.asarray(r.perturbed_bits, dtype=bool) for r in reports])),
                   np.array([r.perturbed_degree for r in reports], dtype=float))

    def replace(self, other: "Reports") -> "Reports":
        """Copy of this collection with the senders in ``other`` swapped for its rows."""
        if other.num_nodes != self.num_nodes:
            raise ValueError("report length mismatch")
        pos = {int(n): k for k, n in enumerate(self.nodes)}
        bits = self.bits.copy()
        deg = self.degrees.copy()
        for k, node in enumerate(other.nodes):
            bits[pos[int(node)]] = other.bits[k]
            deg[pos[int(node)]] = other.degrees[k]
        return Reports(self.num_nodes, self.nodes, bits, deg)

    def subset(self, nodes) -> "Reports":
        pos = {int(n): k for k, n in enumerate(self.nodes)}
        idx = np.array([pos[int(n)] for n in nodes], dtype=np.int64)
        return Reports(self.num_nodes, self.nodes[idx], self.bits[idx], self.degrees[idx])

    def ordered(self) -> "Reports":
        """Rows sorted by sender, checked to cover every node exactly once."""
        if not np.array_equal(np.sort(self.nodes), np.arange(self.num_nodes)):
            raise ValueError("collection must hold exactly one report per node")
        order = np.argsort(self.nodes)
        return Reports(self.num_nodes, self.nodes[order], self.bits[order], self.degrees[order])

    # wire formats ---------------------------------------------------------

    _MAGIC = b"LDPR"

    def write_binary(self, fh: BinaryIO) -> None:
        """``LDPR`` | u32 count | per report: u32 node, u32 nbits, packed row, f64 degree."""
        fh.write(self._MAGIC + struct.pack("<I", len(self)))
        nbytes = bm.row_bytes(self.num_nodes)
        for k in range(len(self)):
            fh.write(struct.pack("<II", int(self.nodes[k]), self.num_nodes))
            fh.write(self.bits[k, :nbytes].tobytes())
            fh.write(struct.pack("<d", float(self.degrees[k])))

    @classmethod
    def read_binary(cls, fh: BinaryIO) -> "Reports":
        if fh.read(4) != cls._MAGIC:
            raise ValueError("not a report stream")
        (count,) = struct.unpack("<I", fh.read(4))
        nodes, rows, degs = [], [], []
        n = None
        for _ in range(count):
            node, nbits = struct.unpack("<II", fh.read(8))
            if n is None:
                n = nbits
            elif nbits != n:
                raise ValueError("ragged report rows")
            rows.append(np.frombuffer(fh.read(bm.row_bytes(nbits)), dtype=np.uint8))
            (deg,) = struct.unpack("<d", fh.read(8))
            nodes.append(node)
            degs.append(deg)
        if n is None:
            raise ValueError("empty report stream")
        return cls(n, np.array(nodes, dtype=np.int64), np.stack(rows), np.array(degs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "perturbed_degree", "bits"])
        for k in range(len(self)):
            row = "".join("1" if b else "0" for b in bm.unpack(self.bits[k], self.num_nodes))
            w.writerow([int(self.nodes[k]), repr(float(self.degrees[k])), row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Reports":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls.from_list([Report(int(r["node"]), np.array([c == "1" for c in r["bits"]]),
                                     float(r["perturbed_degree"])) for r in rows])


def collect_reports(g: Graph, params: PrivacyParams,
                    mode: CollectionMode | str = CollectionMode.SYNCHRONIZED_PAIR,
                    seed: int = 0) -> Reports:
    """Every user runs the protocol on its true row and true degree."""
    n = g.num_nodes
    bits = perturb_adjacency(g, params.p, mode, seed)
    nodes = np.arange(n, dtype=np.int64)
    degrees = perturb_degree(g.degrees, params, seed, nodes)
    return Reports(n, nodes, bits, np.atleast_1d(degrees))
