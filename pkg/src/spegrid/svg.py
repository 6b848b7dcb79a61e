"""SVG rendering of two-player cube-set snapshots.

Axes span the payoff bounds in both dimensions; each cube is one filled
rectangle.  Output is byte-deterministic for a given snapshot: fixed float
formatting, fixed element order.
"""

from __future__ import annotations

from .game import PayoffBounds

_SIZE = 480        # drawing area in px
_MARGIN = 50
_FILL = "#c0392b"
_EDGE = "#7f1d12"


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def render_svg(origins, side: float, bounds: PayoffBounds,
               title: str | None = None) -> str:
    """Render cube origins with a common side length into an SVG document.

    ``origins`` is an iterable of (x, y) payoff points; an empty iterable
    produces the axes only, annotated as empty.  Raises ValueError for
    non-2D origins.
    """
    origins = [tuple(o) for o in origins]
    if any(len(o) != 2 for o in origins):
        raise ValueError("SVG rendering needs two-dimensional origins")
    lo, hi = bounds.low, bounds.high
    span = (hi - lo) if hi > lo else 1.0
    total = _SIZE + 2 * _MARGIN

    def px(x: float) -> float:
        return _MARGIN + (x - lo) / span * _SIZE

    def py(y: float) -> float:
        return _MARGIN + _SIZE - (y - lo) / span * _SIZE

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" '
        f'height="{total}" viewBox="0 0 {total} {total}">',
        f'<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{total / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{title}</text>')
    scale = _SIZE / span
    for ox, oy in sorted(origins):
        w = side * scale
        out.append(
            f'<rect x="{_fmt(px(ox))}" y="{_fmt(py(oy) - w)}" '
            f'width="{_fmt(w)}" height="{_fmt(w)}" '
            f'fill="{_FILL}" stroke="{_EDGE}" stroke-width="0.3"/>')
    if not origins:
        out.append(f'<text x="{total / 2:.1f}" y="{total / 2:.1f}" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'font-size="16" fill="#666">empty</text>')
    # frame and axis labels, drawn above the cubes
    out.append(f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_SIZE}" '
               f'height="{_SIZE}" fill="none" stroke="black" stroke-width="1"/>')
    out.append(f'<text x="{_MARGIN}" y="{total - 12}" font-family="sans-serif" '
               f'font-size="12">{_fmt(lo)}</text>')
    out.append(f'<text x="{_MARGIN + _SIZE}" y="{total - 12}" '
               f'text-anchor="end" font-family="sans-serif" '
               f'font-size="12">{_fmt(hi)}</text>')
    out.append(f'<text x="12" y="{_MARGIN + _SIZE}" font-family="sans-serif" '
               f'font-size="12">{_fmt(lo)}</text>')
    out.append(f'<text x="12" y="{_MARGIN + 12}" font-family="sans-serif" '
               f'font-size="12">{_fmt(hi)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
