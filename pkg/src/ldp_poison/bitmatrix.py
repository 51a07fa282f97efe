"""Packed bit-row matrices (one ``uint8`` row of ``ceil(N/8)`` bytes per node)."""

from __future__ import annotations

import numpy as np

# rows per block when a dense view is needed; multiple of 8
BLOCK = 1024


def row_bytes(n: int) -> int:
    return (n + 7) // 8


def pack(dense: np.ndarray) -> np.ndarray:
    return np.packbits(np.asarray(dense, dtype=bool), axis=-1)


def unpack(packed: np.ndarray, n: int) -> np.ndarray:
    return np.unpackbits(packed, axis=-1, count=n).astype(bool)


def popcount_rows(packed: np.ndarray) -> np.ndarray:
    return np.bitwise_count(packed).sum(axis=-1, dtype=np.int64)


def from_edges(n: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Symmetric packed matrix with bits (u, v) and (v, u) set for each edge."""
    packed = np.zeros((n, row_bytes(n)), dtype=np.uint8)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    for a, b in ((src, dst), (dst, src)):
        masks = (np.uint8(0x80) >> (b % 8).astype(np.uint8)).astype(np.uint8)
        np.bitwise_or.at(packed, (a, b // 8), masks)
    return packed


def get_bit(packed: np.ndarray, i, j):
    j = np.asarray(j)
    return ((packed[i, j // 8] >> (7 - j % 8)) & 1).astype(bool)


def set_bits(row: np.ndarray, cols, value: bool) -> None:
    """In-place set/clear of the given columns of one packed row."""
    cols = np.asarray(cols, dtype=np.int64)
    if cols.size == 0:
        return
    masks = (np.uint8(0x80) >> (cols % 8).astype(np.uint8)).astype(np.uint8)
    if value:
        np.bitwise_or.at(row, cols // 8, masks)
    else:
        np.bitwise_and.at(row, cols // 8, ~masks)


def symmetrize_or(packed: np.ndarray, n: int) -> np.ndarray:
    """``M | M^T`` with a zero diagonal, computed block by block."""
    out = np.empty_like(packed)
    for a in range(0, n, BLOCK):
        b = min(a + BLOCK, n)
        rows = unpack(packed[a:b], n)
        cols = np.unpackbits(packed[:, a // 8 : (b + 7) // 8], axis=1, count=b - a).astype(bool)
        rows |= cols.T
        idx = np.arange(a, b)
        rows[idx - a, idx] = False
        out[a:b] = pack(rows)
    return out


def is_symmetric(packed: np.ndarray, n: int) -> bool:
    for a in range(0, n, BLOCK):
        b = min(a + BLOCK, n)
        rows = unpack(packed[a:b], n)
        cols = np.unpackbits(packed[:, a // 8 : (b + 7) // 8], axis=1, count=b - a).astype(bool)
        if not np.array_equal(rows, cols.T):
            return False
    return True


def row_indices(packed_row: np.ndarray, n: int) -> np.ndarray:
    return np.flatnonzero(np.unpackbits(packed_row, count=n))


def triangles_at(packed: np.ndarray, n: int, nodes) -> np.ndarray:
    """Per-node triangle counts of a symmetric zero-diagonal packed matrix.

    tau_i = 1/2 * sum over neighbours j of |N(i) & N(j)|.
    """
    nodes = np.atleast_1d(np.asarray(nodes, dtype=np.int64))
    out = np.zeros(nodes.shape, dtype=np.int64)
    for k, i in enumerate(nodes):
        row = packed[i]
        nbrs = row_indices(row, n)
        if nbrs.size < 2:
            continue
        common = 0
        for s in range(0, nbrs.size, BLOCK):
            chunk = packed[nbrs[s : s + BLOCK]] & row
            common += int(np.bitwise_count(chunk).sum(dtype=np.int64))
        out[k] = common // 2
    return out
