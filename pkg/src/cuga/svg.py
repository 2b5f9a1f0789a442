"""Minimal static SVG charts (heat map and line plot) written as plain text."""

from __future__ import annotations

from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=150, top=40, bottom=55)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _ramp(t: float) -> str:
    # white -> dark blue
    t = float(np.clip(t, 0.0, 1.0))
    r, g, b = (int(round(255 + (c - 255) * t)) for c in (8, 48, 107))
    return f"rgb({r},{g},{b})"


def heatmap(values: np.ndarray, xlabels, ylabels, xname: str, yname: str, title: str) -> str:
    """Cell ``values[j, k]`` sits in row ``ylabels[j]`` and column ``xlabels[k]``."""
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    x0, y0 = MARGIN["left"], MARGIN["top"]
    w = WIDTH - MARGIN["left"] - MARGIN["right"]
    h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    cw, ch = w / nx, h / ny
    lo, hi = np.nanmin(values), np.nanmax(values)
    span = hi - lo if hi > lo else 1.0
    out = _header(title)
    for j in range(ny):
        for k in range(nx):
            v = values[j, k]
            t = (v - lo) / span
            x, y = x0 + k * cw, y0 + (ny - 1 - j) * ch
            out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cw:.1f}" height="{ch:.1f}" fill="{_ramp(t)}" stroke="white"/>')
            color = "white" if t > 0.55 else "black"
            out.append(f'<text x="{x + cw / 2:.1f}" y="{y + ch / 2 + 4:.1f}" text-anchor="middle" fill="{color}">{_fmt(v)}</text>')
    for k, lab in enumerate(xlabels):
        out.append(f'<text x="{x0 + (k + 0.5) * cw:.1f}" y="{y0 + h + 18}" text-anchor="middle">{escape(str(lab))}</text>')
    for j, lab in enumerate(ylabels):
        out.append(f'<text x="{x0 - 8}" y="{y0 + (ny - 1 - j + 0.5) * ch + 4:.1f}" text-anchor="end">{escape(str(lab))}</text>')
    out.append(f'<text x="{x0 + w / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xname)}</text>')
    out.append(f'<text transform="translate(16,{y0 + h / 2}) rotate(-90)" text-anchor="middle">{escape(yname)}</text>')
    # color key
    kx = WIDTH - MARGIN["right"] + 30
    for s in range(20):
        t = 1 - s / 19
        out.append(f'<rect x="{kx}" y="{y0 + s * h / 20:.1f}" width="16" height="{h / 20 + 0.5:.1f}" fill="{_ramp(t)}"/>')
    out.append(f'<text x="{kx + 22}" y="{y0 + 10}">{_fmt(hi)}</text>')
    out.append(f'<text x="{kx + 22}" y="{y0 + h}">{_fmt(lo)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_plot(
    series: dict[str, tuple],
    xname: str,
    yname: str,
    title: str,
    hlines: dict[str, float] | None = None,
    logx: bool = False,
) -> str:
    """``series`` maps a legend label to ``(xs, ys)``; ``hlines`` adds dashed reference lines."""
    hlines = hlines or {}
    xs_all = np.concatenate([np.asarray(xs, float) for xs, _ in series.values()])
    ys_all = np.concatenate([np.asarray(ys, float) for _, ys in series.values()] + [np.array(list(hlines.values()), float)])
    tx = np.log10 if logx else (lambda v: np.asarray(v, float))
    xlo, xhi = float(np.min(tx(xs_all))), float(np.max(tx(xs_all)))
    ylo, yhi = float(np.min(ys_all)), float(np.max(ys_all))
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    pad = 0.05 * (yhi - ylo) if yhi > ylo else 0.5
    ylo, yhi = ylo - pad, yhi + pad

    x0, y0 = MARGIN["left"], MARGIN["top"]
    w = WIDTH - MARGIN["left"] - MARGIN["right"]
    h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return x0 + (tx(v) - xlo) / (xhi - xlo) * w

    def py(v):
        return y0 + h - (np.asarray(v, float) - ylo) / (yhi - ylo) * h

    out = _header(title)
    out.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="black"/>')
    for t in np.linspace(ylo, yhi, 5):
        out.append(f'<text x="{x0 - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    ticks = sorted(set(np.asarray(xs_all, float).tolist()))
    if len(ticks) > 10:
        ticks = ticks[:: int(np.ceil(len(ticks) / 10))]
    for t in ticks:
        out.append(f'<text x="{px(t):.1f}" y="{y0 + h + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for lab, val in hlines.items():
        out.append(f'<line x1="{x0}" x2="{x0 + w}" y1="{py(val):.1f}" y2="{py(val):.1f}" stroke="gray" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{x0 + w - 4}" y="{py(val) - 4:.1f}" text-anchor="end" fill="gray">{escape(lab)}</text>')
    for n, (lab, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[n % len(PALETTE)]
        order = np.argsort(np.asarray(xs, float))
        pts = " ".join(f"{px(np.asarray(xs, float)[j]):.1f},{py(np.asarray(ys, float)[j]):.1f}" for j in order)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = y0 + 12 + 18 * n
        lx = x0 + w + 12
        out.append(f'<line x1="{lx}" x2="{lx + 20}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(lab)}</text>')
    out.append(f'<text x="{x0 + w / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xname)}</text>')
    out.append(f'<text transform="translate(16,{y0 + h / 2}) rotate(-90)" text-anchor="middle">{escape(yname)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
