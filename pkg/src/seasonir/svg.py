"""Minimal line-chart SVG writer (no plotting dependency)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def line_chart(series: dict, title: str = "", width: int = 720, height: int = 360,
               xlabel: str = "", ylabel: str = "") -> str:
    """SVG text plotting each ``name -> (x, y)`` pair as a polyline."""
    if not series:
        raise ValueError("nothing to plot")
    margin = 50
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(min(ys.min(), 0.0)), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return margin + (np.asarray(x, dtype=float) - x0) / (x1 - x0) * (width - 2 * margin)

    def py(y):
        return height - margin - (np.asarray(y, dtype=float) - y0) / (y1 - y0) * (height - 2 * margin)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
             f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle">{escape(title)}</text>',
             f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
             f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" '
             f'text-anchor="middle">{escape(ylabel)}</text>',
             f'<text x="{margin}" y="{height - margin + 15}" font-size="10">{x0:.6g}</text>',
             f'<text x="{width - margin}" y="{height - margin + 15}" font-size="10" text-anchor="end">{x1:.6g}</text>',
             f'<text x="{margin - 4}" y="{margin}" font-size="10" text-anchor="end">{y1:.6g}</text>']
    for k, (name, (x, y)) in enumerate(series.items()):
        colour = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x), py(y)))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
        parts.append(f'<text x="{width - margin}" y="{margin + 14 * k}" font-size="11" fill="{colour}" '
                     f'text-anchor="end">{escape(str(name))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
