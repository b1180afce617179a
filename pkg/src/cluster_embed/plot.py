"""Self-contained SVG scatter plots, one colour per label."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidInputError, ParameterError

# tab20
PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
]


def _f(v: float) -> str:
    return f"{v:.3f}"


def scatter_svg(coords, labels=None, title: str = "", size: int = 600, radius: float = 2.5) -> str:
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[0] == 0 or coords.shape[1] != 2:
        raise InvalidInputError("nothing to plot: need a non-empty n x 2 coordinate array")
    labels = np.zeros(len(coords), dtype=int) if labels is None else np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) > len(PALETTE):
        raise ParameterError(
            f"{len(classes)} labels exceed the {len(PALETTE)}-colour palette; merge labels before plotting")
    colour = {c: PALETTE[k] for k, c in enumerate(classes)}

    margin = 20.0
    legend_w = 110.0 if len(classes) > 1 else 0.0
    lo = coords.min(axis=0)
    span = float((coords.max(axis=0) - lo).max()) or 1.0
    # one scale for both axes keeps the aspect ratio equal
    scale = (size - 2 * margin) / span
    width = size + legend_w
    height = size

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}">',
        f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    out.append(f'<rect x="{_f(margin / 2)}" y="{_f(margin / 2)}" width="{_f(size - margin)}" '
               f'height="{_f(size - margin)}" fill="none" stroke="#999999" stroke-width="0.5"/>')
    out.append('<g stroke="none">')
    for (x, y), lab in zip(coords, labels.tolist()):
        px = margin + (x - lo[0]) * scale
        py = size - margin - (y - lo[1]) * scale
        out.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="{_f(radius)}" fill="{colour[lab]}" fill-opacity="0.8"/>')
    out.append('</g>')
    if legend_w:
        out.append('<g font-family="sans-serif" font-size="12">')
        for k, c in enumerate(classes):
            y = margin + 18 * k
            out.append(f'<rect x="{_f(size + 5)}" y="{_f(y)}" width="10" height="10" fill="{colour[c]}"/>')
            out.append(f'<text x="{_f(size + 20)}" y="{_f(y + 9)}">{escape(str(c))}</text>')
        out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def write_svg(path, coords, labels=None, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(scatter_svg(coords, labels, title))
