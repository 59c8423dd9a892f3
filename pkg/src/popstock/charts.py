"""Static SVG line charts of z-score series."""
from __future__ import annotations

import math
import os
from xml.sax.saxutils import escape

from .analytics import ZSeries
from .errors import EmptySeries

WIDTH, HEIGHT = 960, 320
LEFT, RIGHT, TOP, BOTTOM = 56, 16, 32, 40
BAND9_Z = 2.0


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_chart(series: ZSeries, title: str | None = None) -> str:
    n = len(series.dates)
    if n == 0:
        raise EmptySeries(f"{series.region}: nothing to plot")
    z = [float(v) for v in series.zscores]
    lo = min(-3.0, math.floor(min(z)))
    hi = max(3.0, math.ceil(max(z)))
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(i: int) -> float:
        return LEFT + (pw * i / (n - 1) if n > 1 else pw / 2)

    def sy(v: float) -> float:
        return TOP + ph * (hi - v) / (hi - lo)

    title = title or f"{series.region}: daily z-score of share"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT}" y="20" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    for tick in range(int(lo), int(hi) + 1):
        y = _fmt(sy(tick))
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{WIDTH - RIGHT}" y2="{y}" '
                   f'stroke="#e0e0e0" stroke-width="1"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y}" font-family="sans-serif" font-size="10" '
                   f'text-anchor="end" dominant-baseline="middle">{tick}</text>')
    for i, d in enumerate(series.dates):
        if d.day == 1 or i == 0:
            x = _fmt(sx(i))
            out.append(f'<text x="{x}" y="{HEIGHT - BOTTOM + 16}" font-family="sans-serif" '
                       f'font-size="10" text-anchor="middle">{d.isoformat()}</text>')
    y0 = _fmt(sy(0.0))
    out.append(f'<line x1="{LEFT}" y1="{y0}" x2="{WIDTH - RIGHT}" y2="{y0}" stroke="#888888" '
               f'stroke-width="1"/>')
    y9 = _fmt(sy(BAND9_Z))
    out.append(f'<line class="band9" x1="{LEFT}" y1="{y9}" x2="{WIDTH - RIGHT}" y2="{y9}" '
               f'stroke="#1b7837" stroke-width="1" stroke-dasharray="6,4"/>')
    pts = " ".join(f"{_fmt(sx(i))},{_fmt(sy(v))}" for i, v in enumerate(z))
    out.append(f'<polyline fill="none" stroke="#8c510a" stroke-width="1.5" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_chart(series: ZSeries, path: str | os.PathLike, title: str | None = None) -> str:
    svg = render_chart(series, title)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return str(path)
