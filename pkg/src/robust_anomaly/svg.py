"""Minimal deterministic SVG writers for the diagnostic plots.

Output contains no timestamps, so identical inputs give identical bytes.
"""

from html import escape
import math

import numpy as np

WIDTH, HEIGHT = 560, 440
MARGIN = 56


def _fmt(v):
    return f"{v:.2f}"


class _Frame:
    """Linear map from data coordinates to the plotting area."""

    def __init__(self, xs, ys, pad=0.05):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
        self.x0, self.x1 = self._span(xs, pad)
        self.y0, self.y1 = self._span(ys, pad)

    @staticmethod
    def _span(v, pad):
        lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        extra = pad * (hi - lo)
        return lo - extra, hi + extra

    def px(self, x):
        return MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * MARGIN)

    def py(self, y):
        return HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * MARGIN)


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
    ]


def _axes(fr, xlabel, ylabel):
    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN
    out = [
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
        'fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for v in np.linspace(fr.x0, fr.x1, 5):
        out.append(f'<text x="{_fmt(fr.px(v))}" y="{bottom + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="10">{v:.3g}</text>')
    for v in np.linspace(fr.y0, fr.y1, 5):
        out.append(f'<text x="{left - 6}" y="{_fmt(fr.py(v) + 3)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{v:.3g}</text>')
    return out


def scatter_plot(x, y, *, title="", xlabel="", ylabel="", flags=None, labels=None,
                 hlines=(), vlines=(), identity=False, polylines=(), lines=()):
    """Scatter plot with optional cutoff lines, identity line, polylines and fitted lines.

    ``polylines`` is a sequence of (points (m, 2), color); ``lines`` a
    sequence of (intercept, slope, color).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xs, ys = [x], [y]
    for pts, _ in polylines:
        pts = np.asarray(pts, float)
        xs.append(pts[:, 0])
        ys.append(pts[:, 1])
    xs.extend(np.atleast_1d(vlines))
    ys.extend(np.atleast_1d(hlines))
    fr = _Frame(np.concatenate([np.atleast_1d(v) for v in xs]),
                np.concatenate([np.atleast_1d(v) for v in ys]))
    out = _header(title) + _axes(fr, xlabel, ylabel)
    left, right = MARGIN, WIDTH - MARGIN
    top, bottom = MARGIN, HEIGHT - MARGIN
    for h in hlines:
        if fr.y0 <= h <= fr.y1:
            out.append(f'<line x1="{left}" y1="{_fmt(fr.py(h))}" x2="{right}" y2="{_fmt(fr.py(h))}" '
                       'stroke="gray" stroke-dasharray="6 3"/>')
    for v in vlines:
        if fr.x0 <= v <= fr.x1:
            out.append(f'<line x1="{_fmt(fr.px(v))}" y1="{top}" x2="{_fmt(fr.px(v))}" y2="{bottom}" '
                       'stroke="gray" stroke-dasharray="6 3"/>')
    if identity:
        lo, hi = max(fr.x0, fr.y0), min(fr.x1, fr.y1)
        if lo < hi:
            out.append(f'<line x1="{_fmt(fr.px(lo))}" y1="{_fmt(fr.py(lo))}" x2="{_fmt(fr.px(hi))}" '
                       f'y2="{_fmt(fr.py(hi))}" stroke="black" stroke-dasharray="3 3"/>')
    for k, (b0, b1, color) in enumerate(lines):
        pts = [(fr.x0, b0 + b1 * fr.x0), (fr.x1, b0 + b1 * fr.x1)]
        out.append(f'<clipPath id="clip{k}"><rect x="{left}" y="{top}" width="{right - left}" '
                   f'height="{bottom - top}"/></clipPath>')
        out.append(f'<line clip-path="url(#clip{k})" x1="{_fmt(fr.px(pts[0][0]))}" '
                   f'y1="{_fmt(fr.py(pts[0][1]))}" x2="{_fmt(fr.px(pts[1][0]))}" '
                   f'y2="{_fmt(fr.py(pts[1][1]))}" stroke="{color}" stroke-width="2"/>')
    for pts, color in polylines:
        coords = " ".join(f"{_fmt(fr.px(a))},{_fmt(fr.py(b))}" for a, b in np.asarray(pts, float))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    flags = np.zeros(x.shape, bool) if flags is None else np.asarray(flags, bool)
    for i, (a, b) in enumerate(zip(x, y)):
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        color = "red" if flags[i] else "black"
        out.append(f'<circle cx="{_fmt(fr.px(a))}" cy="{_fmt(fr.py(b))}" r="3" fill="{color}"/>')
        if flags[i] and labels is not None:
            out.append(f'<text x="{_fmt(fr.px(a) + 5)}" y="{_fmt(fr.py(b) - 4)}" '
                       f'font-family="sans-serif" font-size="10">{escape(str(labels[i]))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _mix(c0, c1, t):
    return tuple(int(round(a + (b - a) * t)) for a, b in zip(c0, c1))


YELLOW, RED, BLUE, BLACK, WHITE = (255, 255, 0), (255, 0, 0), (0, 0, 255), (0, 0, 0), (255, 255, 255)


def diverging_color(v):
    """+1 red, 0 yellow, -1 blue; NaN white."""
    if not math.isfinite(v):
        return WHITE
    v = max(-1.0, min(1.0, v))
    return _mix(YELLOW, RED, v) if v >= 0 else _mix(YELLOW, BLUE, -v)


def gray_color(v):
    """0 yellow, 1 black."""
    if not math.isfinite(v):
        return WHITE
    return _mix(YELLOW, BLACK, max(0.0, min(1.0, v)))


def grid_plot(grid, *, title="", kind="cellmap"):
    """Filled-rectangle rendering of a CellMapGrid."""
    cells = np.asarray(grid.cells, float)
    nr, nc = cells.shape
    color = diverging_color if kind == "cellmap" else gray_color
    cw = (WIDTH - 2 * MARGIN) / nc
    ch = (HEIGHT - 2 * MARGIN) / nr
    out = _header(title)
    for i in range(nr):
        for j in range(nc):
            r, g, b = color(cells[i, j])
            out.append(f'<rect x="{_fmt(MARGIN + j * cw)}" y="{_fmt(MARGIN + i * ch)}" '
                       f'width="{_fmt(cw)}" height="{_fmt(ch)}" fill="rgb({r},{g},{b})"/>')
    step_r = max(1, nr // 20)
    for i in range(0, nr, step_r):
        out.append(f'<text x="{MARGIN - 4}" y="{_fmt(MARGIN + (i + 0.7) * ch)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="9">{escape(grid.row_ticks[i])}</text>')
    step_c = max(1, nc // 20)
    for j in range(0, nc, step_c):
        out.append(f'<text x="{_fmt(MARGIN + (j + 0.5) * cw)}" y="{MARGIN - 6}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="9">{escape(grid.col_ticks[j])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
