"""Dependency-free SVG rendering for trajectories and reward curves.

Output is byte-deterministic: fixed number formatting, fixed palette,
attribute order baked into the templates, and the resolved run config
carried in a <metadata> element instead of timestamps.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(x: float) -> str:
    return f"{float(x):.4f}"


def _header(width, height, title, metadata):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if metadata:
        parts.append(f"<metadata>{escape(metadata)}</metadata>")
    parts.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>')
    if title:
        parts.append(
            f'<text x="{width // 2}" y="18" text-anchor="middle" '
            f'font-family="monospace" font-size="13">{escape(title)}</text>'
        )
    return parts


def render_curves(series, title="", width=640, height=400, metadata="", y_label="") -> str:
    """Line chart of one or more named (xs, ys) series with a shared frame."""
    margin = 48
    parts = _header(width, height, title, metadata)
    xs_all = [float(x) for _, (xs, _) in series.items() for x in xs]
    ys_all = [float(y) for _, (_, ys) in series.items() for y in ys]
    if not xs_all:
        parts.append("</svg>")
        return "\n".join(parts)
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return margin + (float(x) - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y):
        return height - margin - (float(y) - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="#444444" stroke-width="1"/>'
    )
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{_f(sx(xv))}" y="{height - margin + 16}" text-anchor="middle" '
            f'font-family="monospace" font-size="10">{_f(xv)}</text>'
        )
        parts.append(
            f'<text x="{margin - 6}" y="{_f(sy(yv) + 3)}" text-anchor="end" '
            f'font-family="monospace" font-size="10">{_f(yv)}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="14" y="{height // 2}" text-anchor="middle" font-family="monospace" '
            f'font-size="11" transform="rotate(-90 14 {height // 2})">{escape(y_label)}</text>'
        )
    for k, (label, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - margin - 4}" y="{margin + 14 + 14 * k}" text-anchor="end" '
            f'font-family="monospace" font-size="11" fill="{color}">{escape(str(label))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def render_arena(world, paths, d_s=0.075, title="", size=520, metadata="", view=None) -> str:
    """Top-down arena view: wall, obstacle halos, check-ins, agent paths.

    `paths` maps label -> (N, 2) position array; `view` is an optional
    (x_lo, x_hi, y_lo, y_hi) zoom window, defaulting to the full wall.
    """
    margin = 30
    e = world.wall_half_extent
    x_lo, x_hi, y_lo, y_hi = view if view is not None else (-e, e, -e, e)
    span = max(x_hi - x_lo, y_hi - y_lo, 1e-9)
    scale = (size - 2 * margin) / span

    def sx(x):
        return margin + (float(x) - x_lo) * scale

    def sy(y):
        return size - margin - (float(y) - y_lo) * scale

    parts = _header(size, size, title, metadata)
    parts.append(
        f'<rect x="{_f(sx(-e))}" y="{_f(sy(e))}" width="{_f(2 * e * scale)}" '
        f'height="{_f(2 * e * scale)}" fill="none" stroke="#222222" stroke-width="2"/>'
    )
    for obs in world.obstacles:
        cx, cy = _f(sx(obs.position[0])), _f(sy(obs.position[1]))
        halo = (obs.radius + d_s) * scale
        parts.append(
            f'<circle cx="{cx}" cy="{cy}" r="{_f(halo)}" fill="#f2c2c2" stroke="none"/>'
        )
        parts.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="#7f1d1d" stroke="none"/>')
    for k, c in enumerate(world.checkin_points):
        x, y = _f(sx(c[0]) - 4), _f(sy(c[1]) - 4)
        parts.append(f'<rect x="{x}" y="{y}" width="8" height="8" fill="#111111"/>')
        parts.append(
            f'<text x="{_f(sx(c[0]) + 7)}" y="{_f(sy(c[1]) - 6)}" font-family="monospace" '
            f'font-size="10">{k + 1}</text>'
        )
    for k, (label, pts_arr) in enumerate(paths.items()):
        color = PALETTE[k % len(PALETTE)]
        arr = np.asarray(pts_arr, dtype=float)
        if arr.size == 0:
            continue
        pts = " ".join(f"{_f(sx(p[0]))},{_f(sy(p[1]))}" for p in arr)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<circle cx="{_f(sx(arr[0][0]))}" cy="{_f(sy(arr[0][1]))}" r="4" fill="{color}"/>'
        )
        parts.append(
            f'<circle cx="{_f(sx(arr[-1][0]))}" cy="{_f(sy(arr[-1][1]))}" r="4" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{size - margin - 4}" y="{margin + 14 + 14 * k}" text-anchor="end" '
            f'font-family="monospace" font-size="11" fill="{color}">{escape(str(label))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
