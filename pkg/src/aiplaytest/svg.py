"""Minimal SVG line and scatter charts, written as plain text."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 64, 150, 36, 52
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")


def _frame(title: str, xlabel: str, ylabel: str, xr, yr, xticks, yticks) -> list[str]:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
    x0, x1 = LEFT, W - RIGHT
    y0, y1 = H - BOTTOM, TOP
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    sx, sy = _scales(xr, yr)
    for t in xticks:
        px = sx(t)
        out.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.1f}" y="{y0 + 17}" text-anchor="middle">{t:g}</text>')
    for t in yticks:
        py = sy(t)
        out.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 7}" y="{py + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')
    return out


def _scales(xr, yr):
    (xa, xb), (ya, yb) = xr, yr
    xb = xb if xb > xa else xa + 1.0
    yb = yb if yb > ya else ya + 1.0
    sx = lambda x: LEFT + (x - xa) / (xb - xa) * (W - RIGHT - LEFT)
    sy = lambda y: H - BOTTOM - (y - ya) / (yb - ya) * (H - BOTTOM - TOP)
    return sx, sy


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [round(lo + i * (hi - lo) / n, 6) for i in range(n + 1)]


def sweep_chart(table: Mapping[str, Mapping[float, float]], title: str = "Rank correlation with pass rate") -> str:
    """One line per feature: Spearman rho against the best-run fraction."""
    xr, yr = (0.0, 1.0), (-1.0, 1.0)
    out = _frame(title, "fraction of best runs", "Spearman rho", xr, yr, _ticks(0, 1), _ticks(-1, 1, 4))
    sx, sy = _scales(xr, yr)
    for i, (name, series) in enumerate(sorted(table.items())):
        color = PALETTE[i % len(PALETTE)]
        pts = [(f, r) for f, r in sorted(series.items()) if math.isfinite(r)]
        if pts:
            path = " ".join(f"{sx(f):.1f},{sy(r):.1f}" for f, r in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            out.extend(f'<circle cx="{sx(f):.1f}" cy="{sy(r):.1f}" r="3" fill="{color}"/>' for f, r in pts)
        ly = TOP + 18 * i + 10
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{ly}" x2="{W - RIGHT + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 38}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _viridis_like(t: float) -> str:
    # Blue-to-yellow ramp through green.
    stops = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))
    t = min(max(t, 0.0), 1.0) * (len(stops) - 1)
    i = min(int(t), len(stops) - 2)
    f = t - i
    r, g, b = (round(a + (c - a) * f) for a, c in zip(stops[i], stops[i + 1]))
    return f"#{r:02x}{g:02x}{b:02x}"


def scatter_chart(points: Sequence[tuple[int, float, float]], title: str = "Pass rate vs churn rate") -> str:
    """Churn (y) against pass rate (x), one dot per level colored by its position in the sequence."""
    if not points:
        raise ValueError("no points to plot")
    ys = [c for _, _, c in points]
    ytop = max(0.05, max(ys) * 1.1)
    xr, yr = (0.0, 1.0), (0.0, ytop)
    out = _frame(title, "pass rate", "churn rate", xr, yr, _ticks(0, 1), _ticks(0, ytop, 4))
    sx, sy = _scales(xr, yr)
    n = len(points)
    for k, (lid, p, c) in enumerate(points):
        out.append(f'<circle cx="{sx(p):.1f}" cy="{sy(c):.1f}" r="4" fill="{_viridis_like(k / max(n - 1, 1))}">'
                   f'<title>level {lid}</title></circle>')
    for j, lab in enumerate(("first level", "last level")):
        ly = TOP + 18 * j + 10
        out.append(f'<circle cx="{W - RIGHT + 20}" cy="{ly}" r="4" fill="{_viridis_like(float(j))}"/>')
        out.append(f'<text x="{W - RIGHT + 30}" y="{ly + 4}">{lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
