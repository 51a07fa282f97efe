"""Minimal line charts as hand-written SVG: mean of y per x, one polyline per series."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 160, 30, 50
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def _num(v: str) -> float:
    return float(v) if v not in ("", None) else float("nan")


def series_means(rows: list[dict], x: str, y: str, series: str | None):
    """{series: [(x, mean y, std y), ...]} with x ascending."""
    groups: dict[str, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        key = r[series] if series else y
        groups[key][_num(r[x])].append(_num(r[y]))
    out = {}
    for key in sorted(groups):
        pts = []
        for xv in sorted(groups[key]):
            ys = np.array(groups[key][xv], dtype=float)
            ys = ys[np.isfinite(ys)]
            if ys.size:
                pts.append((xv, float(ys.mean()), float(ys.std())))
        out[key] = pts
    return out


def _ticks(lo: float, hi: float, n: int = 5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _label(v: float) -> str:
    return f"{v:.4g}"


def render_svg(data, x: str, y: str) -> str:
    pts = [p for s in data.values() for p in s]
    xs = [p[0] for p in pts] or [0.0]
    lo_y = [p[1] - p[2] for p in pts] or [0.0]
    hi_y = [p[1] + p[2] for p in pts] or [1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(lo_y), max(hi_y)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    if y0 == y1:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.2f}" y="{TOP + ph + 18}" font-size="11" text-anchor="middle">{_label(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{LEFT - 6}" y="{sy(t) + 4:.2f}" font-size="11" text-anchor="end">{_label(t)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{H - 12}" font-size="13" text-anchor="middle">{escape(x)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">{escape(y)}</text>')
    for i, (name, s) in enumerate(data.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b, _ in s)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for a, b, sd in s:
            if sd > 0:
                out.append(f'<line x1="{sx(a):.2f}" y1="{sy(b - sd):.2f}" x2="{sx(a):.2f}" y2="{sy(b + sd):.2f}" '
                           f'stroke="{color}" stroke-width="1"/>')
        ly = TOP + 16 * i + 8
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{ly}" x2="{W - RIGHT + 36}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 42}" y="{ly + 4}" font-size="11">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plot(csv_path, x: str, y: str, series: str | None, out) -> Path:
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        rows = list(reader)
    for f in (x, y) + ((series,) if series else ()):
        if f not in names:
            raise KeyError(f"field {f!r} not in {csv_path}")
    out = Path(out)
    out.write_text(render_svg(series_means(rows, x, y, series), x, y), encoding="utf-8")
    return out
