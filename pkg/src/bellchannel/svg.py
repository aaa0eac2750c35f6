"""Minimal self-contained SVG line plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_plot(x, curves: dict, *, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, width: int = 640, height: int = 420) -> str:
    """Render ``curves`` (label -> y values) against ``x`` as an SVG document."""
    xs = [math.log10(v) if logx else float(v) for v in x]
    ys = [float(v) for ys_ in curves.values() for v in ys_ if math.isfinite(float(v))]
    x0, x1 = min(xs), max(xs)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
             f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        label = f"1e{t:.1f}" if logx else f"{t:.3g}"
        parts.append(f'<text x="{px(t):.1f}" y="{top + ph + 18}" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1):
        parts.append(f'<text x="{left - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{top - 14}" text-anchor="middle">{escape(title)}</text>')
    for i, (label, values) in enumerate(curves.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        pts = " ".join(f"{px(a):.2f},{py(float(b)):.2f}" for a, b in zip(xs, values)
                       if math.isfinite(float(b)))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{left + pw - 8}" y="{top + 16 + 14 * i}" text-anchor="end" '
                     f'fill="{colour}">{escape(str(label))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
