"""CSV persistence of run traces and SVG regret plots."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np


def csv_header(d_x: int, d_c: int) -> list[str]:
    return (
        ["problem", "method", "seed", "t"]
        + [f"x{i + 1}" for i in range(d_x)]
        + [f"c{i + 1}" for i in range(d_c)]
        + ["y", "r_t", "R_t", "mean_radius", "gamma_t", "beta_t", "wall_ms"]
    )


def _fmt(v: float) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def write_csv(results, path) -> Path:
    """Write one row per iteration for every run in ``results``.

    All runs must share the problem dimensions. Floats use the shortest
    representation that round-trips exactly.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to write")
    d_x, d_c = results[0].x.shape[1], results[0].c.shape[1]
    if any(r.x.shape[1] != d_x or r.c.shape[1] != d_c for r in results):
        raise ValueError("results with different dimensions cannot share a CSV")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(d_x, d_c))
        for res in results:
            R = res.R
            for t in range(res.T):
                w.writerow(
                    [res.problem, res.method, res.seed, t + 1]
                    + [_fmt(v) for v in res.x[t]]
                    + [_fmt(v) for v in res.c[t]]
                    + [_fmt(res.y[t]), _fmt(res.r[t]), _fmt(R[t]), _fmt(res.mean_radius[t])]
                    + [_fmt(res.gamma[t]), _fmt(res.beta[t]), _fmt(res.wall_ms[t])]
                )
    return path


def write_failures(results, path) -> Path | None:
    failed = [r for r in results if r.failure]
    if not failed:
        return None
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(["problem", "method", "seed", "completed", "error"])
        for r in failed:
            w.writerow([r.problem, r.method, r.seed, r.T, r.failure])
    return path


@dataclass
class LoadedRun:
    problem: str
    method: str
    seed: int
    x: np.ndarray
    c: np.ndarray
    y: np.ndarray
    r: np.ndarray
    R: np.ndarray
    mean_radius: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    wall_ms: np.ndarray

    @property
    def final_regret(self) -> float:
        return float(self.R[-1])


def read_csv(path) -> list[LoadedRun]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
        ccols = [i for i, h in enumerate(header) if h.startswith("c") and h[1:].isdigit()]
        col = {h: i for i, h in enumerate(header)}
        groups: dict[tuple, list[list[str]]] = defaultdict(list)
        for row in reader:
            groups[(row[col["problem"]], row[col["method"]], int(row[col["seed"]]))].append(row)
    runs = []
    for (problem, method, seed), rows in groups.items():
        rows.sort(key=lambda r: int(r[col["t"]]))
        A = lambda name: np.array([float(r[col[name]]) for r in rows])  # noqa: E731
        runs.append(
            LoadedRun(
                problem, method, seed,
                np.array([[float(r[i]) for i in xcols] for r in rows]),
                np.array([[float(r[i]) for i in ccols] for r in rows]),
                A("y"), A("r_t"), A("R_t"), A("mean_radius"), A("gamma_t"), A("beta_t"),
                A("wall_ms"),
            )
        )
    return runs


def load_dir(directory) -> list[LoadedRun]:
    runs = []
    for p in sorted(Path(directory).rglob("*.csv")):
        if p.name in ("oracle_cache.csv", "failures.csv", "timings.csv"):
            continue
        runs.extend(read_csv(p))
    return runs


def cumulative_consistent(run: LoadedRun) -> bool:
    """True when R_t is exactly the running sum of r_t."""
    return list(accumulate(run.r.tolist())) == run.R.tolist()


def summarise(runs) -> dict[tuple[str, str], tuple[float, float, int]]:
    """Mean, std and count of final cumulative regret per (problem, method)."""
    by = defaultdict(list)
    for r in runs:
        by[(r.problem, r.method)].append(r.final_regret)
    return {k: (float(np.mean(v)), float(np.std(v)), len(v)) for k, v in sorted(by.items())}


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

COLOURS = {"edrbo": "#d62728", "erbo": "#1f77b4", "ucb": "#2ca02c"}
_FALLBACK = ["#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

PANEL_W, PANEL_H, MARGIN = 360, 240, 48


def _bands(runs, attr: str):
    by = defaultdict(list)
    for r in runs:
        by[r.method].append(getattr(r, attr))
    out = {}
    for method, series in sorted(by.items()):
        T = min(len(s) for s in series)
        M = np.vstack([s[:T] for s in series])
        out[method] = (M.mean(axis=0), M.std(axis=0))
    return out


def _panel(title: str, bands, ox: float, oy: float) -> list[str]:
    lo = min(float(np.nanmin(m - s)) for m, s in bands.values())
    hi = max(float(np.nanmax(m + s)) for m, s in bands.values())
    lo = min(lo, 0.0)
    if not hi > lo:
        hi = lo + 1.0
    T = max(len(m) for m, _ in bands.values())
    w, h = PANEL_W - 2 * MARGIN, PANEL_H - 2 * MARGIN

    def px(t):
        return ox + MARGIN + w * (t / max(T - 1, 1))

    def py(v):
        return oy + MARGIN + h * (1.0 - (v - lo) / (hi - lo))

    def pts(xs, ys):
        return " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))

    el = [
        f'<g class="panel" data-title="{escape(title)}">',
        f'<rect x="{ox + MARGIN}" y="{oy + MARGIN}" width="{w}" height="{h}" '
        'fill="none" stroke="#444" stroke-width="0.8"/>',
        f'<text x="{ox + PANEL_W / 2}" y="{oy + MARGIN - 14}" text-anchor="middle" '
        f'font-size="13">{escape(title)}</text>',
        f'<text x="{ox + MARGIN - 4}" y="{py(hi):.2f}" text-anchor="end" font-size="9">{hi:.3g}</text>',
        f'<text x="{ox + MARGIN - 4}" y="{py(lo):.2f}" text-anchor="end" font-size="9">{lo:.3g}</text>',
        f'<text x="{px(T - 1):.2f}" y="{oy + PANEL_H - MARGIN + 12}" text-anchor="end" '
        f'font-size="9">t = {T}</text>',
    ]
    for k, (method, (m, s)) in enumerate(bands.items()):
        colour = COLOURS.get(method, _FALLBACK[k % len(_FALLBACK)])
        t = np.arange(len(m))
        band = pts(t, m + s) + " " + pts(t[::-1], (m - s)[::-1])
        el.append(f'<polygon points="{band}" fill="{colour}" fill-opacity="0.18" stroke="none"/>')
        el.append(
            f'<polyline points="{pts(t, m)}" fill="none" stroke="{colour}" '
            f'stroke-width="1.4" data-method="{escape(method)}"/>'
        )
        ly = oy + MARGIN + 12 + 12 * k
        el.append(
            f'<text x="{ox + MARGIN + 6}" y="{ly}" font-size="10" fill="{colour}">{escape(method)}</text>'
        )
    el.append("</g>")
    return el


def render_svg(runs, path, instantaneous: bool = False) -> Path:
    """Mean +/- std of cumulative regret across seeds, one panel per problem.

    With ``instantaneous`` a second row shows the per-iteration regret.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to plot")
    problems = sorted({r.problem for r in runs})
    rows = 2 if instantaneous else 1
    width, height = PANEL_W * len(problems), PANEL_H * rows
    el = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, prob in enumerate(problems):
        sub = [r for r in runs if r.problem == prob]
        el += _panel(f"{prob}: cumulative regret", _bands(sub, "R"), PANEL_W * i, 0)
        if instantaneous:
            el += _panel(f"{prob}: instantaneous regret", _bands(sub, "r"), PANEL_W * i, PANEL_H)
    el.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(el) + "\n")
    return path
