"""Standalone SVG scatter plots of 2-D embeddings (no plotting library needed)."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import ParameterError
from .geometry import as_points

# viridis sampled at 9 evenly spaced stops
_RAMP = np.array([
    [68, 1, 84], [71, 44, 122], [59, 81, 139], [44, 113, 142], [33, 144, 141],
    [39, 173, 129], [92, 200, 99], [170, 220, 50], [253, 231, 37],
], dtype=np.float64)
_SINGLE = "#3b518b"


def ramp_color(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0) * (len(_RAMP) - 1)
    lo = int(np.floor(t))
    hi = min(lo + 1, len(_RAMP) - 1)
    rgb = _RAMP[lo] + (t - lo) * (_RAMP[hi] - _RAMP[lo])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def render_svg(embedding, labels: Optional[np.ndarray] = None, size: int = 480,
               margin: int = 16, radius: float = 2.0, title: Optional[str] = None) -> str:
    """Equal-aspect scatter; points coloured by ``labels`` along the viridis ramp."""
    pts = as_points(embedding)
    if pts.shape[1] != 2:
        raise ParameterError(f"plot needs a 2-column embedding, got {pts.shape[1]} columns")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.float64).reshape(-1)
        if labels.shape[0] != pts.shape[0]:
            raise ParameterError("labels length does not match the number of points")

    lo = pts.min(axis=0)
    span = float((pts.max(axis=0) - lo).max())
    scale = (size - 2 * margin) / span if span > 0 else 1.0
    # centre the shorter axis
    offset = margin + 0.5 * ((size - 2 * margin) - scale * (pts.max(axis=0) - lo))
    sx = offset[0] + scale * (pts[:, 0] - lo[0])
    sy = size - (offset[1] + scale * (pts[:, 1] - lo[1]))

    if labels is None:
        colors = [_SINGLE] * pts.shape[0]
    else:
        lmin, lmax = labels.min(), labels.max()
        rel = (labels - lmin) / (lmax - lmin) if lmax > lmin else np.zeros_like(labels)
        colors = [ramp_color(t) for t in rel]

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    if title:
        esc = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        out.append(f'<title>{esc}</title>')
    out.append(f'<g stroke="none" fill-opacity="0.85">')
    for x, y, c in zip(sx, sy, colors):
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius:g}" fill="{c}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
