"""Countermeasures: frequent-itemset detection with row reconstruction,
degree-gap detection with removal, naive degree baselines, and scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import bitmatrix as bm
from .collect import Reports

# frequent itemsets are materialised as row bitmaps; refuse to go past this
MAX_ITEMSETS = 3_000_000


@dataclass(frozen=True)
class DetectorConfig:
    # None picks a noise-aware level per report set, see noise_floor_support
    min_support: int | None = None
    max_itemset_size: int = 3
    itemset_threshold: float = 300
    # None means derive it from the reports (max row degree plus 3 sigma)
    degree_gap_threshold: float | None = None
    naive_fraction: float = 0.03

    def __post_init__(self):
        if self.min_support is not None and self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.max_itemset_size < 2:
            raise ValueError("max_itemset_size must be >= 2")
        if self.itemset_threshold < 0 or (self.degree_gap_threshold or 0) < 0:
            raise ValueError("thresholds must be non-negative")
        if not 0 < self.naive_fraction < 0.5:
            raise ValueError("naive_fraction must lie in (0, 0.5)")

    @classmethod
    def default(cls, num_nodes: int, **overrides) -> "DetectorConfig":
        """Fixed support of one percent of the rows."""
        return cls(min_support=max(1, math.ceil(0.01 * num_nodes)), **overrides)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    flagged: np.ndarray
    cleaned: Reports
    precision: float | None = None
    recall: float | None = None

    def scored(self, true_fakes) -> "DetectionResult":
        prec, rec = evaluate_detection(self.flagged, true_fakes)
        return DetectionResult(self.flagged, self.cleaned, prec, rec)


def evaluate_detection(flagged, true_fakes) -> tuple[float, float]:
    flagged = {int(x) for x in flagged}
    truth = {int(x) for x in true_fakes}
    hit = len(flagged & truth)
    precision = hit / len(flagged) if flagged else 1.0
    recall = hit / len(truth) if truth else 1.0
    return precision, recall


# frequent itemsets --------------------------------------------------------


class _Transactions:
    """Vertical layout: one packed bitmap over rows for every item (column)."""

    def __init__(self, reports: Reports):
        r = reports.ordered() if len(reports) == reports.num_nodes else reports
        self.rows = len(r)
        self.items = r.num_nodes
        self.dense = bm.unpack(r.bits, r.num_nodes)
        self.columns = np.packbits(self.dense.T, axis=1)

    def bitmaps(self, itemsets: np.ndarray) -> np.ndarray:
        out = self.columns[itemsets[:, 0]].copy()
        for c in range(1, itemsets.shape[1]):
            out &= self.columns[itemsets[:, c]]
        return out


def _frequent_pairs(tx: _Transactions, items: np.ndarray, min_support: int):
    x = tx.dense[:, items].astype(np.float32)
    co = x.T @ x
    a, b = np.nonzero(np.triu(co >= min_support - 0.5, k=1))
    pairs = np.column_stack([items[a], items[b]])
    return pairs, co[a, b].round().astype(np.int64)


def _join(level: np.ndarray) -> np.ndarray:
    """Apriori candidate generation with downward-closure pruning; ``level`` is sorted."""
    k = level.shape[1]
    known = {tuple(row) for row in level.tolist()}
    cands = []
    prefixes: dict[tuple, list[int]] = {}
    for row in level.tolist():
        prefixes.setdefault(tuple(row[:-1]), []).append(row[-1])
    for prefix, lasts in prefixes.items():
        for x, y in combinations(sorted(lasts), 2):
            cand = prefix + (x, y)
            if all(cand[:i] + cand[i + 1 :] in known for i in range(k - 1)):
                cands.append(cand)
            if len(cands) > MAX_ITEMSETS:
                raise MemoryError("too many candidate itemsets; raise min_support or lower max size")
    return np.array(cands, dtype=np.int64).reshape(-1, k + 1)


def _mine(tx: _Transactions, min_support: int, max_size: int):
    item_support = tx.dense.sum(axis=0)
    items = np.flatnonzero(item_support >= min_support)
    levels = []
    if max_size < 2 or items.size < 2:
        return levels
    level, support = _frequent_pairs(tx, items, min_support)
    if level.shape[0] > MAX_ITEMSETS:
        raise MemoryError("too many frequent pairs; raise min_support")
    while level.shape[0]:
        levels.append((level, support))
        if level.shape[1] >= max_size:
            break
        cands = _join(level)
        if not cands.shape[0]:
            break
        sup = np.concatenate([bm.popcount_rows(tx.bitmaps(cands[s : s + 65536]))
                              for s in range(0, cands.shape[0], 65536)])
        keep = sup >= min_support
        level, support = cands[keep], sup[keep]
    return levels


def mine_frequent_itemsets(reports: Reports, min_support: int, max_size: int = 3) -> list[tuple[tuple[int, ...], int]]:
    """Itemsets of size 2..max_size (items are claimed neighbours) with their supports."""
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    tx = _Transactions(reports)
    out = []
    for level, support in _mine(tx, min_support, max_size):
        out.extend((tuple(int(v) for v in row), int(s)) for row, s in zip(level, support))
    return out


def itemset_counts(reports: Reports, min_support: int, max_size: int = 3) -> np.ndarray:
    """For every report row, how many frequent itemsets its claimed neighbour set contains."""
    tx = _Transactions(reports)
    counts = np.zeros(tx.rows, dtype=np.int64)
    for level, _ in _mine(tx, min_support, max_size):
        for s in range(0, level.shape[0], 8192):
            maps = tx.bitmaps(level[s : s + 8192])
            counts += np.unpackbits(maps, axis=1, count=tx.rows).sum(axis=0, dtype=np.int64)
    return counts


def reconstruct_after_itemset_detection(reports: Reports, flagged) -> Reports:
    """Rebuild each flagged row from what unflagged users claim about that node."""
    r = reports.ordered()
    flagged = np.unique(np.asarray(list(flagged), dtype=np.int64))
    if flagged.size == 0:
        return r
    n = r.num_nodes
    keep = np.ones(n, dtype=bool)
    keep[flagged] = False
    claims = bm.get_bit(r.bits, np.arange(n)[:, None], flagged[None, :]) & keep[:, None]
    bits = r.bits.copy()
    bits[flagged] = bm.pack(claims.T)
    return Reports(n, r.nodes, bits, r.degrees)


def detect_by_itemsets(reports: Reports, cfg: DetectorConfig, true_fakes=None) -> DetectionResult:
    support = cfg.min_support if cfg.min_support is not None else noise_floor_support(reports)
    counts = itemset_counts(reports, support, cfg.max_itemset_size)
    flagged = np.flatnonzero(counts > cfg.itemset_threshold)
    result = DetectionResult(flagged, reconstruct_after_itemset_detection(reports, flagged))
    return result if true_fakes is None else result.scored(true_fakes)


# degree based --------------------------------------------------------------


def own_row_degree_estimates(reports: Reports, p: float) -> np.ndarray:
    """Calibrated degree of each sender from its own submitted row."""
    if not p > 0.5:
        raise ValueError("p must exceed 0.5")
    r = reports.ordered()
    raw = bm.popcount_rows(r.bits)
    return (raw - (r.num_nodes - 1) * (1 - p)) / (2 * p - 1)


def remove_nodes(reports: Reports, flagged) -> Reports:
    """Drop the flagged rows and erase every claim that points at a flagged node."""
    r = reports.ordered()
    flagged = np.unique(np.asarray(list(flagged), dtype=np.int64))
    bits = r.bits.copy()
    if flagged.size:
        bits[flagged] = 0
        mask = np.ones(r.num_nodes, dtype=bool)
        mask[flagged] = False
        packed_mask = bm.pack(mask)
        bits &= packed_mask[None, :]
    return Reports(r.num_nodes, r.nodes, bits, r.degrees)


def degree_gap_threshold(dhat: np.ndarray, epsilon2: float) -> float:
    sigma = math.sqrt(2) * (2 / epsilon2)
    return float(dhat.max()) + 3 * sigma


def detect_by_degree_gap(reports: Reports, p: float, epsilon2: float, true_fakes=None,
                         threshold: float | None = None) -> DetectionResult:
    """Flag senders whose reported degree strays from their row's degree by more
    than the largest row-based degree plus three Laplace standard deviations."""
    if epsilon2 <= 0:
        raise ValueError("epsilon2 must be positive")
    r = reports.ordered()
    dhat = own_row_degree_estimates(r, p)
    gap = np.abs(r.degrees - dhat)
    if threshold is None:
        threshold = degree_gap_threshold(dhat, epsilon2)
    flagged = np.flatnonzero(gap > threshold)
    result = DetectionResult(flagged, remove_nodes(r, flagged))
    return result if true_fakes is None else result.scored(true_fakes)


def naive_degree_detector(reports: Reports, fraction: float = 0.03, mode: str = "top", *, p: float,
                          cleaning: str = "remove", true_fakes=None) -> DetectionResult:
    """Flag the ``ceil(fraction*N)`` highest (and, for ``extremes``, lowest)
    row-based degrees; ties go to the smaller node id."""
    if not 0 < fraction < 0.5:
        raise ValueError("fraction must lie in (0, 0.5)")
    if mode not in ("top", "extremes"):
        raise ValueError("mode must be 'top' or 'extremes'")
    r = reports.ordered()
    dhat = own_row_degree_estimates(r, p)
    ids = np.arange(r.num_nodes)
    k = math.ceil(round(fraction * r.num_nodes, 9))
    flagged = set(np.lexsort((ids, -dhat))[:k].tolist())
    if mode == "extremes":
        flagged |= set(np.lexsort((ids, dhat))[:k].tolist())
    flagged = np.array(sorted(flagged), dtype=np.int64)
    clean = remove_nodes if cleaning == "remove" else reconstruct_after_itemset_detection
    result = DetectionResult(flagged, clean(r, flagged))
    return result if true_fakes is None else result.scored(true_fakes)


def noise_floor_support(reports: Reports, z: float = 6.0) -> int:
    """Support level that two unrelated items reach only ``z`` standard
    deviations above chance, given how dense the submitted rows are."""
    r = reports.ordered()
    dens = bm.popcount_rows(r.bits) / max(r.num_nodes - 1, 1)
    mu = float((dens**2).sum())
    return max(1, math.ceil(0.01 * r.num_nodes), math.ceil(mu + z * math.sqrt(mu)))


def detection_to_csv(result: DetectionResult, num_nodes: int, true_fakes=()) -> str:
    flagged = set(int(x) for x in result.flagged)
    fakes = set(int(x) for x in true_fakes)
    lines = ["node,flagged,is_fake"]
    lines += [f"{u},{int(u in flagged)},{int(u in fakes)}" for u in range(num_nodes)]
    return "\n".join(lines) + "\n"
