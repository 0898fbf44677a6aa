"""Dependency-free SVG line charts."""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 900, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 170, 50, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12:
        ticks.append(round(t, 10))
        t += step
    return ticks


def line_chart(title: str, series: Sequence[tuple[str, str, Sequence[tuple[float, float]]]],
               x_label: str = "Year", y_label: str = "") -> str:
    """Render ``series`` of (label, color, [(x, y), ...]) as one polyline each.

    Series without points still get an (empty) polyline so the element count
    is fixed by the number of series.
    """
    xs = [x for _, _, pts in series for x, _ in pts]
    ys = [y for _, _, pts in series for _, y in pts]
    if not xs:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    pad = 0.05 * (y_hi - y_lo) or 0.5
    y_lo, y_hi = y_lo - pad, y_hi + pad

    left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    top, bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (right - left)

    def sy(y):
        return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="25" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for t in _nice_ticks(x_lo, x_hi, 8):
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{bottom}" x2="{_fmt(sx(t))}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{bottom + 18}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi, 6):
        out.append(f'<line x1="{left - 5}" y1="{_fmt(sy(t))}" x2="{left}" y2="{_fmt(sy(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{(left + right) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="18" y="{(top + bottom) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(top + bottom) / 2})">{escape(y_label)}</text>')

    for i, (label, color, pts) in enumerate(series):
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline data-series="{escape(label)}" fill="none" stroke="{color}" '
                   f'stroke-width="2" points="{coords}"/>')
        ly = top + 10 + 20 * i
        out.append(f'<line x1="{right + 15}" y1="{ly}" x2="{right + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right + 45}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
