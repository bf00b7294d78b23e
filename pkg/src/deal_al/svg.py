"""Minimal self-contained SVG line charts for learning curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = {
    "RS": "#7f7f7f",
    "US": "#1f77b4",
    "ERS": "#2ca02c",
    "DEAL": "#d62728",
}
_FALLBACK = ("#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22")

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 110, 40, 50


@dataclass
class Series:
    name: str
    mean: Sequence[float]
    std: Sequence[float] | None = None


def _color(name: str, i: int) -> str:
    return PALETTE.get(name, _FALLBACK[i % len(_FALLBACK)])


def _f(v: float) -> str:
    return f"{v:.2f}"


def learning_curve_svg(series: Sequence[Series], title: str = "",
                       reference: float | None = None, x_label: str = "labeled samples",
                       y_label: str = "test accuracy") -> str:
    """Render mean curves (with optional +-1 std bands) as an SVG document."""
    n_max = max((len(s.mean) for s in series), default=1)
    lo = 0.0
    hi = 1.0
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(t):  # t is the labeled-set size, 1-based
        return MARGIN_L + (0.5 if n_max == 1 else (t - 1) / (n_max - 1)) * pw

    def sy(v):
        return MARGIN_T + (1.0 - (min(max(v, lo), hi) - lo) / (hi - lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
    ]
    x0, x1 = MARGIN_L, MARGIN_L + pw
    y0, y1 = MARGIN_T + ph, MARGIN_T
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for v in np.linspace(lo, hi, 6):
        y = sy(v)
        out.append(f'<line x1="{x0 - 4}" y1="{_f(y)}" x2="{x0}" y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 7}" y="{_f(y + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{v:.1f}</text>')
    ticks = sorted({1, n_max} | {int(t) for t in np.linspace(1, n_max, 5)})
    for t in ticks:
        x = sx(t)
        out.append(f'<line x1="{_f(x)}" y1="{y0}" x2="{_f(x)}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(x)}" y="{y0 + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{t}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(x_label)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(y_label)}</text>')

    if reference is not None:
        y = sy(reference)
        out.append(f'<line class="reference" x1="{x0}" y1="{_f(y)}" x2="{x1}" y2="{_f(y)}" '
                   f'stroke="black" stroke-dasharray="6,4"/>')

    for i, s in enumerate(series):
        color = _color(s.name, i)
        mean = np.asarray(s.mean, dtype=float)
        ts = np.arange(1, mean.size + 1)
        if s.std is not None and mean.size:
            std = np.asarray(s.std, dtype=float)
            upper = [f"{_f(sx(t))},{_f(sy(m + e))}" for t, m, e in zip(ts, mean, std)]
            lower = [f"{_f(sx(t))},{_f(sy(m - e))}" for t, m, e in zip(ts, mean, std)][::-1]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
                       f'fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{_f(sx(t))},{_f(sy(m))}" for t, m in zip(ts, mean))
        if mean.size == 1:
            # a single point still renders as a visible tick
            pts = f"{_f(sx(1) - 3)},{_f(sy(mean[0]))} {_f(sx(1) + 3)},{_f(sy(mean[0]))}"
        out.append(f'<polyline data-strategy="{escape(s.name)}" points="{pts}" fill="none" '
                   f'stroke="{color}" stroke-width="2"/>')
        ly = MARGIN_T + 14 + 18 * i
        out.append(f'<line x1="{x1 + 12}" y1="{ly}" x2="{x1 + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x1 + 38}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
