"""Undirected graphs on packed adjacency rows, edge-list ingestion and exact metrics."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from . import bitmatrix as bm


class EdgeListError(ValueError):
    """Raised for malformed or empty edge-list input."""


@dataclass(frozen=True)
class GraphStats:
    edge_count: int
    avg_degree: float
    edge_density: float


@dataclass(frozen=True, eq=False)
class Graph:
    """Symmetric, loop-free adjacency over nodes ``0..N-1``.

    ``bits`` holds row ``i`` of the adjacency matrix packed MSB-first;
    ``labels`` maps dense ids back to the labels seen at ingestion.
    """

    num_nodes: int
    bits: np.ndarray
    degrees: np.ndarray
    labels: np.ndarray | None = field(default=None)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]] | np.ndarray,
                   labels: np.ndarray | None = None) -> "Graph":
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("edge endpoint out of range")
        arr = arr[arr[:, 0] != arr[:, 1]]
        bits = bm.from_edges(n, arr[:, 0], arr[:, 1])
        return cls(n, bits, bm.popcount_rows(bits), labels)

    @classmethod
    def from_dense(cls, adjacency: np.ndarray) -> "Graph":
        a = np.asarray(adjacency, dtype=bool)
        a = a | a.T
        np.fill_diagonal(a, False)
        bits = bm.pack(a)
        return cls(a.shape[0], bits, bm.popcount_rows(bits))

    @property
    def edge_count(self) -> int:
        return int(self.degrees.sum()) // 2

    def dense(self) -> np.ndarray:
        return bm.unpack(self.bits, self.num_nodes)

    def neighbors(self, i: int) -> np.ndarray:
        return bm.row_indices(self.bits[i], self.num_nodes)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(bm.get_bit(self.bits, i, j))

    def edges(self) -> np.ndarray:
        """Edge array with ``u < v``, sorted."""
        out = []
        for i in range(self.num_nodes):
            nb = self.neighbors(i)
            nb = nb[nb > i]
            out.append(np.column_stack([np.full(nb.size, i), nb]))
        return np.concatenate(out) if out else np.empty((0, 2), dtype=np.int64)


def load_edge_list(source: IO[bytes] | IO[str] | bytes | str, *, one_indexed: bool = False,
                   comment_prefix: str = "#") -> Graph:
    """Parse a whitespace-separated edge list into a :class:`Graph`.

    Duplicate and reversed edges collapse, self-loops are dropped and labels
    are remapped to dense ids in order of first appearance.  ``one_indexed``
    only affects how labels are reported back, since labels are remapped anyway.
    """
    if isinstance(source, (bytes, str)):
        source = io.BytesIO(source.encode() if isinstance(source, str) else source)
    label_of: dict[int, int] = {}
    src: list[int] = []
    dst: list[int] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line or line.startswith(comment_prefix):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise EdgeListError(f"line {lineno}: expected two node ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-integer node id in {line!r}") from None
        for x in (u, v):
            if x not in label_of:
                label_of[x] = len(label_of)
        if u != v:
            src.append(label_of[u])
            dst.append(label_of[v])
    if not label_of:
        raise EdgeListError("empty edge list")
    labels = np.fromiter(label_of.keys(), dtype=np.int64, count=len(label_of))
    if one_indexed:
        labels = labels - 1
    edges = np.column_stack([np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64)])
    return Graph.from_edges(len(label_of), edges, labels=labels)


def degree_centrality(g: Graph, i: int) -> float:
    if g.num_nodes < 2:
        raise ValueError("degree centrality needs at least two nodes")
    return float(g.degrees[i]) / (g.num_nodes - 1)


def triangle_count(g: Graph, i: int) -> int:
    return int(bm.triangles_at(g.bits, g.num_nodes, [i])[0])


def triangle_counts(g: Graph, nodes=None) -> np.ndarray:
    nodes = np.arange(g.num_nodes) if nodes is None else nodes
    return bm.triangles_at(g.bits, g.num_nodes, nodes)


def clustering_from(tau, degree) -> np.ndarray:
    """``2 tau / (d (d - 1))``, zero where ``d < 2``."""
    tau = np.asarray(tau, dtype=float)
    d = np.asarray(degree, dtype=float)
    pairs = d * (d - 1)
    return np.divide(2 * tau, pairs, out=np.zeros(np.broadcast(tau, d).shape), where=d >= 2)


def local_clustering_coefficient(g: Graph, i: int) -> float:
    return float(clustering_from(triangle_count(g, i), g.degrees[i]))


def graph_stats(g: Graph) -> GraphStats:
    n = g.num_nodes
    if n < 2:
        raise ValueError("graph statistics need at least two nodes")
    e = g.edge_count
    return GraphStats(edge_count=e, avg_degree=2 * e / n, edge_density=2 * e / (n * (n - 1)))
