"""Synthetic generators and CSV ingestion."""
from __future__ import annotations

import csv
import math
from typing import Optional, Sequence, Union

import numpy as np

from .dissim import DataMatrix
from .errors import ParameterError, ParseError


def gen_gmm(d: int = 10, points_per_component: int = 200, seed: int = 0) -> DataMatrix:
    """d unit-variance isotropic Gaussians in R^d, component i centred at 1.5*sqrt(d)*e_i."""
    if d < 2:
        raise ParameterError(f"d must be >= 2, got {d}")
    rng = np.random.default_rng(seed)
    means = 1.5 * math.sqrt(d) * np.eye(d)
    points = np.concatenate([rng.standard_normal((points_per_component, d)) + means[i] for i in range(d)])
    labels = np.repeat(np.arange(d), points_per_component)
    return DataMatrix(points, labels)


def gen_planar_clusters(spec: Sequence, seed: int = 0, background: int = 0,
                        box: Optional[Sequence[float]] = None) -> DataMatrix:
    """Gaussian blobs in the plane.

    ``spec`` holds ``(count, (cx, cy), spread)`` triples. ``background`` uniform points
    drawn from ``box=(xmin, xmax, ymin, ymax)`` may be appended with label -1.
    """
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    for lab, (count, center, spread) in enumerate(spec):
        if count < 1:
            raise ParameterError(f"cluster {lab} must have at least one point")
        pts.append(np.asarray(center, float) + spread * rng.standard_normal((count, 2)))
        labels.append(np.full(count, lab))
    if background:
        if box is None:
            allp = np.concatenate(pts)
            box = (allp[:, 0].min(), allp[:, 0].max(), allp[:, 1].min(), allp[:, 1].max())
        xmin, xmax, ymin, ymax = box
        pts.append(np.column_stack([rng.uniform(xmin, xmax, background), rng.uniform(ymin, ymax, background)]))
        labels.append(np.full(background, -1))
    return DataMatrix(np.concatenate(pts), np.concatenate(labels))


def half_cylinder_radius(planar) -> float:
    """Radius for which the planar x-extent spans exactly half the circumference."""
    x = planar.points[:, 0] if isinstance(planar, DataMatrix) else np.asarray(planar)[:, 0]
    return 2.0 * float(np.max(np.abs(x))) / math.pi


def gen_half_cylinder(planar_clusters, radius: Optional[float] = None) -> DataMatrix:
    """Isometric wrap (x, y) -> (R sin(x/R), y, R cos(x/R)) onto a half cylinder."""
    dm = planar_clusters if isinstance(planar_clusters, DataMatrix) else DataMatrix(planar_clusters)
    if dm.d != 2:
        raise ParameterError(f"planar data must be 2-D, got d={dm.d}")
    r = half_cylinder_radius(dm) if radius is None else float(radius)
    if not r > 0:
        raise ParameterError("radius must be positive")
    x, y = dm.points[:, 0], dm.points[:, 1]
    limit = math.pi * r / 2.0
    if np.max(np.abs(x)) > limit * (1 + 1e-12):
        raise ParameterError(f"x-extent {np.max(np.abs(x)):.6g} exceeds the half circumference bound {limit:.6g}")
    out = np.column_stack([r * np.sin(x / r), y, r * np.cos(x / r)])
    return DataMatrix(out, dm.labels)


def save_csv(data: DataMatrix, path, header: bool = True) -> None:
    """Write points (and a trailing ``label`` column when present) at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            names = [f"x{j}" for j in range(data.d)]
            if data.labels is not None:
                names.append("label")
            w.writerow(names)
        for i in range(data.n):
            row = [format(v, ".17g") for v in data.points[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            w.writerow(row)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv(path, label_column: Union[str, int, None] = None) -> DataMatrix:
    """Read a rectangular numeric CSV with an optional single header row.

    ``label_column`` is a header name or a zero-based column index.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    width = len(header) if header else len(rows[0])
    values = np.empty((len(rows), width))
    first_line = 2 if header else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: row {r + first_line} has {len(row)} fields, expected {width}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r + first_line}, column {c + 1}: non-numeric value {cell!r}") from None

    labels = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise ParseError(f"{path}: label column {label_column!r} not found")
            col = header.index(label_column)
        else:
            col = int(label_column)
            if not -width <= col < width:
                raise ParseError(f"{path}: label column {label_column!r} not found")
            col %= width
        lab = values[:, col]
        if not np.all(lab == np.round(lab)):
            raise ParseError(f"{path}: label column {label_column!r} is not integer-valued")
        labels = lab.astype(int)
        values = np.delete(values, col, axis=1)
    return DataMatrix(values, labels)
