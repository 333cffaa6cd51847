"""Minimal SVG line charts for convergence trends."""

import math
from xml.sax.saxutils import escape

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _scale(values, log):
    vals = [math.log10(v) if log else v for v in values]
    lo, hi = min(vals), max(vals)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    return lambda v: ((math.log10(v) if log else v) - lo) / (hi - lo), lo, hi


def line_chart(series, title="", xlabel="", ylabel="", logx=False, logy=False, width=560, height=380):
    """``series`` maps a label to (xs, ys). Non-positive values are dropped on log axes."""
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y) and (x > 0 or not logx) and (y > 0 or not logy)]
        if pts:
            clean[label] = pts
    allx = [p[0] for pts in clean.values() for p in pts] or [0.0, 1.0]
    ally = [p[1] for pts in clean.values() for p in pts] or [0.0, 1.0]
    fx, x0, x1 = _scale(allx, logx)
    fy, y0, y1 = _scale(ally, logy)
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    px = lambda x: left + fx(x) * pw
    py = lambda y: top + (1 - fy(y)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="15" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 15 {top + ph / 2})">'
           f'{escape(ylabel)}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        xt = 10**xv if logx else xv
        yt = 10**yv if logy else yv
        out.append(f'<text x="{left + frac * pw}" y="{top + ph + 16}" text-anchor="middle">{xt:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{top + (1 - frac) * ph + 4}" text-anchor="end">{yt:.3g}</text>')
    for k, (label, pts) in enumerate(clean.items()):
        color = COLORS[k % len(COLORS)]
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{path}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{left + pw - 8}" y="{top + 16 + 15 * k}" text-anchor="end" fill="{color}">'
                   f'{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(path, series, **kwargs):
    with open(path, "w") as fh:
        fh.write(line_chart(series, **kwargs))
