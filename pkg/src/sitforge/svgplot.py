"""Self-contained SVG line charts: polylines, axes, ticks, legend. No plotting deps.

Output is a deterministic byte stream for a given series list, which keeps the
emitted reports reproducible.
"""

from __future__ import annotations

import math

PALETTE = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
]

WIDTH, HEIGHT = 860, 520
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 180, 50, 60


def _escape(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def _fmt(value):
    return f"{value:.2f}"


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / count
    return [lo + i * step for i in range(count + 1)]


def line_chart(series, title="", x_label="", y_label="", y_range=None):
    """Render [(label, xs, ys), ...] to an SVG string. NaN points are skipped."""
    points = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
              if not (isinstance(y, float) and math.isnan(y))]
    if not points:
        raise ValueError("nothing to plot")
    x_lo = min(p[0] for p in points)
    x_hi = max(p[0] for p in points)
    if y_range is not None:
        y_lo, y_hi = y_range
    else:
        y_lo = min(p[1] for p in points)
        y_hi = max(p[1] for p in points)
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    bottom = HEIGHT - MARGIN_BOTTOM

    def px(x):
        if x_hi == x_lo:
            return MARGIN_LEFT + plot_w / 2
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return bottom - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<rect width="100%" height="100%" fill="#ffffff"/>',
           f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" font-size="18" '
           f'font-family="sans-serif">{_escape(title)}</text>']
    for tick in _nice_ticks(y_lo, y_hi):
        y = py(tick)
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{_fmt(y)}" x2="{WIDTH - MARGIN_RIGHT}" '
                   f'y2="{_fmt(y)}" stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                   f'font-size="12" font-family="sans-serif">{_fmt(tick)}</text>')
    xs_all = sorted({p[0] for p in points})
    tick_xs = xs_all if len(xs_all) <= 12 else _nice_ticks(x_lo, x_hi, 8)
    for tick in tick_xs:
        x = px(tick)
        out.append(f'<line x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 5}" '
                   f'stroke="#000000" stroke-width="1"/>')
        label = _fmt(tick) if tick != int(tick) else str(int(tick))
        out.append(f'<text x="{_fmt(x)}" y="{bottom + 20}" text-anchor="middle" '
                   f'font-size="12" font-family="sans-serif">{label}</text>')
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{bottom}" x2="{WIDTH - MARGIN_RIGHT}" '
               f'y2="{bottom}" stroke="#000000" stroke-width="1.5"/>')
    out.append(f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
               f'y2="{bottom}" stroke="#000000" stroke-width="1.5"/>')
    out.append(f'<text x="{MARGIN_LEFT + plot_w / 2:.0f}" y="{HEIGHT - 14}" '
               f'text-anchor="middle" font-size="13" font-family="sans-serif">'
               f'{_escape(x_label)}</text>')
    out.append(f'<text x="20" y="{MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" '
               f'font-size="13" font-family="sans-serif" '
               f'transform="rotate(-90 20 {MARGIN_TOP + plot_h / 2:.0f})">'
               f'{_escape(y_label)}</text>')
    for s, (label, xs, ys) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        coords = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys)
                  if not (isinstance(y, float) and math.isnan(y))]
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                       f'points="{" ".join(coords)}"/>')
        ly = MARGIN_TOP + 16 + 18 * s
        lx = WIDTH - MARGIN_RIGHT + 14
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}" font-size="12" '
                   f'font-family="sans-serif">{_escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path, series, **kwargs):
    with open(path, "w", newline="\n") as fh:
        fh.write(line_chart(series, **kwargs))
