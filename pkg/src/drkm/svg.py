"""Deterministic SVG scatter plots, no plotting dependency.

The renderer is a pure function from point groups to SVG text: fixed
canvas, fixed palette, coordinates formatted to four decimals, so equal
inputs give byte-equal files.
"""

import numpy as np

from .errors import InvalidArgument

PALETTE = {
    "gray": "#9aa0a6",
    "orange": "#e8710a",
    "blue": "#1967d2",
    "green": "#188038",
    "purple": "#8430ce",
}

_MARGIN = 36.0


def _fmt(value):
    return f"{value:.4f}"


def scatter_svg(groups, size=560, title=None, comment=None):
    """Scatter plot of labelled 2-d point groups.

    groups is a sequence of (label, points, color, radius) with points an
    (n, 2) array and color a PALETTE key or any SVG color string.  A
    comment string is embedded verbatim inside an XML comment so
    provenance can ride along without affecting rendering.
    """
    if not groups:
        raise InvalidArgument("need at least one point group")
    cleaned = []
    for label, points, color, radius in groups:
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise InvalidArgument(f"group {label!r} must be an (n, 2) array")
        if not np.all(np.isfinite(points)):
            raise InvalidArgument(f"group {label!r} contains non-finite points")
        cleaned.append((str(label), points, PALETTE.get(color, color), float(radius)))

    nonempty = [p for _, p, _, _ in cleaned if len(p)]
    if not nonempty:
        raise InvalidArgument("all groups are empty")
    stacked = np.concatenate(nonempty, axis=0)
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * span.max()
    lo = lo - pad
    half = 0.5 * (span.max() + 2.0 * pad)
    center = 0.5 * (stacked.min(axis=0) + stacked.max(axis=0))
    # one shared scale for both axes keeps the geometry undistorted
    lo = center - half
    scale = (size - 2.0 * _MARGIN) / (2.0 * half)

    def to_canvas(points):
        x = _MARGIN + (points[:, 0] - lo[0]) * scale
        y = size - _MARGIN - (points[:, 1] - lo[1]) * scale
        return x, y

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">'
    ]
    if comment is not None:
        safe = str(comment).replace("--", "- -")
        lines.append(f"<!-- {safe} -->")
    lines.append(f'<rect width="{size}" height="{size}" fill="#ffffff"/>')
    if title:
        lines.append(
            f'<text x="{_fmt(size / 2.0)}" y="22" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14" fill="#202124">{title}</text>'
        )
    for label, points, color, radius in cleaned:
        lines.append(f'<g fill="{color}" fill-opacity="0.75">')
        x, y = to_canvas(points)
        for px, py in zip(x, y):
            lines.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{_fmt(radius)}"/>')
        lines.append("</g>")
    legend_y = 40.0
    for label, _, color, radius in cleaned:
        lines.append(
            f'<circle cx="{_fmt(_MARGIN + 6.0)}" cy="{_fmt(legend_y)}" '
            f'r="{_fmt(max(radius, 3.0))}" fill="{color}"/>'
        )
        lines.append(
            f'<text x="{_fmt(_MARGIN + 16.0)}" y="{_fmt(legend_y + 4.0)}" '
            f'font-family="sans-serif" font-size="12" fill="#202124">{label}</text>'
        )
        legend_y += 18.0
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
