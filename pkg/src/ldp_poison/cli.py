"""Command line entry point (``ldp-poison``)."""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import harness
from .collect import collect_reports, split_budget
from .datasets import FetchError, IntegrityError, RegistryError, fetch_dataset, load_dataset
from .estimator import (MetricEstimate, assemble_perturbed_graph, estimate_clustering_coefficient,
                        estimate_degree_centrality, estimates_to_csv)
from .graph import clustering_from, triangle_counts
from .plot import render_plot


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--dataset")
    p.add_argument("--metric", choices=["degree", "cc"])
    p.add_argument("--attack", choices=["rva", "rna", "mga"])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["synchronized-pair", "dual-report-or"])
    p.add_argument("--fake-init", choices=["fresh", "compromised"])
    p.add_argument("--baseline", choices=list(harness.BASELINES))
    p.add_argument("--compromise-density", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--min-support", type=int)
    p.add_argument("--max-itemset-size", type=int)
    p.add_argument("--naive-fraction", type=float)
    p.add_argument("--cache-dir")
    p.add_argument("--large", dest="allow_large", action="store_const", const=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="results CSV (default stdout)")
    p.add_argument("--timing", action="store_true", help="record wall_time_ms (breaks byte-identical reruns)")


def _config(args, **extra) -> harness.ExperimentConfig:
    names = {f.name for f in dataclasses.fields(harness.ExperimentConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return harness.load_config(args.config, **overrides)


def _emit(rows, args) -> None:
    harness.write_results(rows, args.out or sys.stdout, timing=args.timing)


def cmd_fetch(args) -> int:
    path = fetch_dataset(args.name, args.cache_dir, allow_large=args.large)
    print(path)
    return 0


def cmd_metrics(args) -> int:
    g = load_dataset(args.dataset, args.cache_dir, allow_large=args.large)
    nodes = np.arange(g.num_nodes) if not args.nodes else np.array(args.nodes, dtype=np.int64)
    if args.exact:
        print("node_id,degree_centrality,triangles,clustering_coefficient")
        tau = triangle_counts(g, nodes)
        cc = clustering_from(tau, g.degrees[nodes])
        for i, t, c in zip(nodes, tau, cc):
            print(f"{i},{float(g.degrees[i] / (g.num_nodes - 1))!r},{int(t)},{float(c)!r}")
        return 0
    params = split_budget(args.epsilon, args.alpha)
    reports = collect_reports(g, params, args.mode, args.seed)
    pg = assemble_perturbed_graph(reports, args.mode)
    est: list[MetricEstimate] = []
    for i in nodes:
        if args.metric in ("degree", "both"):
            est.append(estimate_degree_centrality(pg, params.p, int(i)))
        if args.metric in ("cc", "both"):
            est.append(estimate_clustering_coefficient(pg, reports, params.p, int(i)))
    sys.stdout.write(estimates_to_csv(est))
    return 0


def cmd_attack(args) -> int:
    _emit(harness.run_trials(_config(args, defense=getattr(args, "defense", None))), args)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args, defense=args.defense)
    values = [float(v) for v in args.values.split(",")]
    _emit(harness.run_sweep(cfg, args.param, values), args)
    return 0


def cmd_plot(args) -> int:
    render_plot(args.csv, args.x, args.y, args.series, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldp-poison", description="Poisoning attacks on edge-LDP graph metrics")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download and verify a registered dataset")
    p.add_argument("name")
    p.add_argument("--cache-dir")
    p.add_argument("--large", action="store_true")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("metrics", help="per-node estimates from one simulated collection")
    p.add_argument("dataset")
    p.add_argument("--metric", choices=["degree", "cc", "both"], default="both")
    p.add_argument("--epsilon", type=float, default=4.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--mode", default="synchronized-pair", choices=["synchronized-pair", "dual-report-or"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, nargs="*")
    p.add_argument("--exact", action="store_true", help="exact metrics, no privacy")
    p.add_argument("--cache-dir")
    p.add_argument("--large", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("attack", help="run attack trials")
    _experiment_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("defend", help="run attack trials followed by a countermeasure")
    _experiment_flags(p)
    p.add_argument("--defense", choices=list(harness.DEFENSES), required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="trials over a grid of one parameter")
    _experiment_flags(p)
    p.add_argument("--param", choices=sorted(harness.SWEEP_PARAMS), required=True)
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--defense", choices=list(harness.DEFENSES))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG line chart from a results CSV")
    p.add_argument("csv")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--series")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RegistryError, IntegrityError, FetchError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
