"""Minimal log-log line plots written as plain SVG."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _ticks(lo, hi):
    a, b = math.floor(lo), math.ceil(hi)
    return list(range(a, b + 1))


def loglog(series, title="", xlabel="", ylabel="", width=640, height=420) -> str:
    """Render ``series`` = [(label, xs, ys, dashed)] on log axes.

    Non-positive points are dropped. Returns the SVG document as a string.
    """
    pts = []
    for label, xs, ys, dashed in series:
        keep = [(math.log10(x), math.log10(y)) for x, y in zip(xs, ys)
                if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
        pts.append((label, keep, dashed))
    allx = [p[0] for _, k, _ in pts for p in k] or [0.0, 1.0]
    ally = [p[1] for _, k, _ in pts for p in k] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 64, 150, 32, 48
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{sx(t):.2f}" y1="{mt + ph}" x2="{sx(t):.2f}" y2="{mt + ph + 4}" stroke="#444"/>')
            out.append(f'<text x="{sx(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">1e{t}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{ml - 4}" y1="{sy(t):.2f}" x2="{ml}" y2="{sy(t):.2f}" stroke="#444"/>')
            out.append(f'<text x="{ml - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">1e{t}</text>')
    for i, (label, keep, dashed) in enumerate(pts):
        col = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="5,3"' if dashed else ""
        if keep:
            path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in keep)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5"{dash} points="{path}"/>')
        ly = mt + 14 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" stroke="{col}"{dash}/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}">{escape(str(label))}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{mt - 10}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path, svg: str):
    with open(path, "w") as fh:
        fh.write(svg)
