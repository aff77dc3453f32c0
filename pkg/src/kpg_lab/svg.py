"""Minimal deterministic SVG line/scatter charts for traces."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .trace import ConvergenceTrace

WIDTH, HEIGHT, PAD = 640, 420, 60


def _shade(level: int, top: int) -> str:
    # light for k = 0, dark for the highest level
    frac = 0.0 if top <= 0 else level / top
    v = int(round(210 - 190 * frac))
    return f"rgb({v},{v},{min(255, v + 40)})"


class _Axes:
    def __init__(self, xs, ys, log_y=False):
        xs = np.asarray([x for x in xs if np.isfinite(x)], dtype=float)
        ys = np.asarray([y for y in ys if np.isfinite(y) and (y > 0 or not log_y)], dtype=float)
        self.log_y = log_y and ys.size > 0
        if self.log_y:
            ys = np.log10(ys)
        self.x0, self.x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
        self.y0, self.y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 0.5, self.x1 + 0.5
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5

    def px(self, x, y):
        if self.log_y:
            y = math.log10(y) if y > 0 else self.y0
        u = PAD + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * PAD)
        v = HEIGHT - PAD - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * PAD)
        return u, v

    def frame(self, title, xlabel, ylabel):
        yfmt = (lambda t: f"1e{t:.1f}") if self.log_y else (lambda t: f"{t:.4g}")
        parts = [
            f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" fill="none" stroke="black"/>',
            f'<text x="{WIDTH / 2}" y="{PAD / 2}" text-anchor="middle" font-size="16">{escape(title)}</text>',
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
            f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>',
            f'<text x="{PAD}" y="{HEIGHT - PAD + 16}" text-anchor="middle" font-size="11">{self.x0:.4g}</text>',
            f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 16}" text-anchor="middle" font-size="11">{self.x1:.4g}</text>',
            f'<text x="{PAD - 5}" y="{HEIGHT - PAD}" text-anchor="end" font-size="11">{yfmt(self.y0)}</text>',
            f'<text x="{PAD - 5}" y="{PAD + 4}" text-anchor="end" font-size="11">{yfmt(self.y1)}</text>',
        ]
        return parts


def _polyline(ax, xs, ys, color, label=None):
    pts = " ".join("%.3f,%.3f" % ax.px(x, y) for x, y in zip(xs, ys) if np.isfinite(y))
    attr = f' data-label="{escape(label)}"' if label else ""
    return f'<polyline class="series"{attr} points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'


def _document(parts) -> str:
    body = "\n".join(parts)
    return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')


def k_convergence(trace: ConvergenceTrace, update: int | None = None) -> tuple:
    """dist_star against k for one update (the last one by default). Returns (svg, ks, values)."""
    joint = trace.joint()
    update = max(r.update for r in joint) if update is None else update
    rows = sorted((r for r in joint if r.update == update and r.dist_star is not None), key=lambda r: r.k)
    ks = [r.k for r in rows]
    ds = [r.dist_star for r in rows]
    ax = _Axes(ks, ds)
    parts = ax.frame(f"distance to reference within update {update}", "reasoning level k", "dist_star")
    parts.append(_polyline(ax, ks, ds, "rgb(20,20,120)", "dist_star"))
    parts += ['<circle cx="%.3f" cy="%.3f" r="3" fill="rgb(20,20,120)"/>' % ax.px(k, d) for k, d in zip(ks, ds)]
    return _document(parts), ks, ds


def learning_curve(trace: ConvergenceTrace) -> tuple:
    joint = trace.joint()
    final = {}
    for r in joint:
        if r.ret is not None and r.k >= final.get(r.update, (-1, None))[0]:
            final[r.update] = (r.k, r.ret)
    xs = sorted(final)
    ys = [final[u][1] for u in xs]
    ax = _Axes(xs, ys)
    parts = ax.frame("exact return per update", "update", "return")
    parts.append(_polyline(ax, xs, ys, "rgb(160,30,30)", "return"))
    return _document(parts), xs, ys


def trajectory(trace: ConvergenceTrace, params=None) -> str:
    """Parameter paths coloured by level when a 2-D parameter sidecar is available,
    otherwise dist_star over updates with one line per level."""
    if params and len(params[0][2]) == 2:
        top = max(k for _, k, _ in params)
        xs = [p[2][0] for p in params]
        ys = [p[2][1] for p in params]
        ax = _Axes(xs, ys)
        parts = ax.frame("parameter trajectory by reasoning level", "theta_1", "theta_2")
        for level in range(top + 1):
            pts = [(p[2][0], p[2][1]) for p in params if p[1] == level]
            parts.append(_polyline(ax, [a for a, _ in pts], [b for _, b in pts], _shade(level, top), f"k={level}"))
        return _document(parts)
    joint = trace.joint()
    top = max(r.k for r in joint)
    xs = [r.update for r in joint]
    ys = [r.dist_star if r.dist_star is not None else np.nan for r in joint]
    ax = _Axes(xs, ys, log_y=True)
    parts = ax.frame("distance to reference by reasoning level", "update", "dist_star")
    for level in range(top + 1):
        rows = [r for r in joint if r.k == level and r.dist_star is not None]
        parts.append(_polyline(ax, [r.update for r in rows], [r.dist_star for r in rows], _shade(level, top), f"k={level}"))
    return _document(parts)
