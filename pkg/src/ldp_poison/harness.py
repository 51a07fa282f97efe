"""Experiment driver: one trial is threat planning, honest collection, attack,
gain measurement and an optional countermeasure; sweeps repeat trials over a
parameter grid and results land in a flat CSV."""

from __future__ import annotations

import csv
import dataclasses
import functools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bitmatrix as bm
from . import defenses as D
from .attacks import AttackKind, FakeInit, Metric, compromise, craft, extend_graph, measure_knowledge, plan_threat
from .collect import CollectionMode, Reports, collect_reports, split_budget
from .datasets import load_dataset
from .estimator import assemble_perturbed_graph
from .gain import _unpaired, baseline_reports, gain_between, theoretical_gain_cc, theoretical_gain_degree
from .graph import Graph
from .rng import stream_key

DEFENSES = ("itemsets", "degree_gap", "naive_top", "naive_extremes")
BASELINES = ("paired", "unpaired", "genuine-only")
SWEEP_PARAMS = {"epsilon": "epsilon", "beta": "beta", "gamma": "gamma", "threshold": "threshold"}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "facebook"
    metric: str = "degree"
    attack: str = "mga"
    epsilon: float = 4.0
    alpha: float = 0.5
    beta: float = 0.05
    gamma: float = 0.05
    trials: int = 10
    seed: int = 0
    mode: str = CollectionMode.SYNCHRONIZED_PAIR.value
    fake_init: str = FakeInit.FRESH.value
    baseline: str = "paired"
    # compromised fakes get edges at this density; default is the graph's own
    compromise_density: float | None = None
    defense: str | None = None
    threshold: float = 300
    min_support: int | None = None
    max_itemset_size: int = 3
    naive_fraction: float = 0.03
    cache_dir: str | None = None
    allow_large: bool = False
    workers: int = 1

    def __post_init__(self):
        Metric(self.metric)
        AttackKind(self.attack)
        CollectionMode(self.mode)
        FakeInit(self.fake_init)
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        if self.defense is not None and self.defense not in DEFENSES:
            raise ValueError(f"defense must be one of {DEFENSES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def detector(self) -> D.DetectorConfig:
        return D.DetectorConfig(self.min_support, self.max_itemset_size, self.threshold,
                                naive_fraction=self.naive_fraction)


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    metric: str
    attack: str
    epsilon: float
    beta: float
    gamma: float
    trial: int
    gain_empirical: float
    gain_theoretical: float | None
    defense: str | None
    post_defense_gain: float | None
    precision: float | None
    recall: float | None
    wall_time_ms: float = field(default=0.0, compare=False)
    failed: bool = field(default=False, compare=False)


FIELDS = [f.name for f in fields(ResultRow) if f.name != "failed"]


def trial_seed(seed: int, trial: int) -> int:
    return int(stream_key(seed, f"trial/{trial}")) & ((1 << 63) - 1)


@functools.lru_cache(maxsize=4)
def _load(dataset: str, cache_dir: str | None, allow_large: bool) -> Graph:
    return load_dataset(dataset, cache_dir, allow_large=allow_large)


def run_trial(cfg: ExperimentConfig, trial_index: int, graph: Graph | None = None) -> ResultRow:
    t0 = time.perf_counter()
    g = graph if graph is not None else _load(cfg.dataset, cfg.cache_dir, cfg.allow_large)
    s = trial_seed(cfg.seed, trial_index)
    params = split_budget(cfg.epsilon, cfg.alpha)
    mode = CollectionMode(cfg.mode)
    metric = Metric(cfg.metric)

    tm = plan_threat(g.num_nodes, cfg.beta, cfg.gamma, s, cfg.fake_init)
    if tm.fake_init is FakeInit.COMPROMISED:
        density = cfg.compromise_density
        if density is None:
            density = 2 * g.edge_count / (g.num_nodes * (g.num_nodes - 1))
        tm = compromise(tm, density, s)
    full = extend_graph(g, tm)
    honest = collect_reports(full, params, mode, s)
    if cfg.baseline == "paired":
        baseline = honest
    elif cfg.baseline == "unpaired":
        baseline = collect_reports(full, params, mode, _unpaired(s))
    else:
        baseline = _genuine_only(full, tm, params, mode, s)

    row = dict(dataset=cfg.dataset, metric=cfg.metric, attack=cfg.attack, epsilon=cfg.epsilon,
               beta=cfg.beta, gamma=cfg.gamma, trial=trial_index, defense=cfg.defense,
               post_defense_gain=None, precision=None, recall=None)
    if tm.m == 0:
        row.update(gain_empirical=0.0, gain_theoretical=0.0)
        if cfg.defense:
            row.update(post_defense_gain=0.0, precision=1.0, recall=1.0)
        return ResultRow(**row, wall_time_ms=_ms(t0))

    k = measure_knowledge(assemble_perturbed_graph(honest, mode), params, mode)
    plan = craft(cfg.attack, metric, tm, k, s)
    attacked = honest.replace(plan.reports)
    gain = gain_between(baseline, attacked, tm.targets, metric, params.p, mode, plan.kind).total
    row.update(gain_empirical=gain, gain_theoretical=_theory(cfg, tm, params.p, k.avg_perturbed_degree))

    if cfg.defense:
        result = apply_defense(cfg, attacked, params, tm.fake_ids)
        post = gain_between(baseline, result.cleaned, tm.targets, metric, params.p, mode, plan.kind).total
        row.update(post_defense_gain=post, precision=result.precision, recall=result.recall)
    failed = not math.isfinite(gain)
    return ResultRow(**row, wall_time_ms=_ms(t0), failed=failed)


def apply_defense(cfg: ExperimentConfig, reports, params, fakes) -> D.DetectionResult:
    det = cfg.detector()
    if cfg.defense == "itemsets":
        return D.detect_by_itemsets(reports, det, fakes)
    if cfg.defense == "degree_gap":
        return D.detect_by_degree_gap(reports, params.p, params.epsilon2, fakes)
    # the top-degree baseline stands in for itemset detection, so it shares its cleaning
    if cfg.defense == "naive_top":
        return D.naive_degree_detector(reports, det.naive_fraction, "top", p=params.p,
                                       cleaning="reconstruct", true_fakes=fakes)
    return D.naive_degree_detector(reports, det.naive_fraction, "extremes", p=params.p,
                                   cleaning="remove", true_fakes=fakes)


def _theory(cfg: ExperimentConfig, tm, p: float, d: float) -> float | None:
    if AttackKind(cfg.attack) is not AttackKind.MGA:
        return None
    if Metric(cfg.metric) is Metric.DEGREE:
        return theoretical_gain_degree(tm.m, tm.r, tm.N, d)
    return theoretical_gain_cc(tm.m, tm.r, tm.N, p, d)


def _genuine_only(full: Graph, tm, params, mode, s):
    """Genuine users only, padded with empty fake rows so node ids line up."""
    short = baseline_reports(full, tm, params, s, mode, genuine_only=True)
    dense = np.zeros((tm.N, tm.N), dtype=bool)
    dense[: tm.n, : tm.n] = bm.unpack(short.ordered().bits, tm.n)
    degrees = np.concatenate([short.ordered().degrees, np.zeros(tm.m)])
    return Reports(tm.N, np.arange(tm.N), bm.pack(dense), degrees)


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000, 3)


def _trial_job(args):
    cfg, i = args
    return run_trial(cfg, i)


def run_trials(cfg: ExperimentConfig) -> list[ResultRow]:
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_trial_job, jobs))
    return [_trial_job(j) for j in jobs]


def run_sweep(cfg: ExperimentConfig, param: str, values) -> list[ResultRow]:
    """Every value crossed with every trial; rows ordered by value, then trial."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    jobs = [(dataclasses.replace(cfg, **{SWEEP_PARAMS[param]: v}), i)
            for v in values for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_trial_job, jobs))
    return [_trial_job(j) for j in jobs]


# results files --------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows, out, *, timing: bool = False) -> None:
    """CSV with one line per row.  Wall-clock time is blanked unless ``timing``
    is set, so re-running an experiment reproduces the file byte for byte."""
    if hasattr(out, "write"):
        _write_rows(rows, out, timing)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        _write_rows(rows, fh, timing)


def _write_rows(rows, fh, timing: bool) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(FIELDS)
    for r in rows:
        vals = [getattr(r, f) for f in FIELDS]
        if not timing:
            vals[-1] = None
        w.writerow([_fmt(v) for v in vals])


_FLOATS = {"epsilon", "beta", "gamma", "gain_empirical", "gain_theoretical", "post_defense_gain",
           "precision", "recall", "wall_time_ms"}


def read_results(path) -> list[ResultRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {}
            for k in FIELDS:
                v = rec[k]
                if v == "":
                    vals[k] = 0.0 if k == "wall_time_ms" else None
                elif k in _FLOATS:
                    vals[k] = float(v)
                elif k == "trial":
                    vals[k] = int(v)
                else:
                    vals[k] = v
            vals["failed"] = not math.isfinite(vals["gain_empirical"])
            rows.append(ResultRow(**vals))
    return rows


# config files ---------------------------------------------------------------


def _convert(name: str, text: str):
    default = next(f for f in fields(ExperimentConfig) if f.name == name)
    kind = default.type if isinstance(default.type, str) else str(default.type)
    text = text.strip()
    if text.lower() in ("", "none", "null") and "None" in kind:
        return None
    if kind.startswith("bool"):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{name}: expected a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def parse_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def load_config(path, **overrides) -> ExperimentConfig:
    values = parse_config(Path(path).read_text(encoding="utf-8")) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)
