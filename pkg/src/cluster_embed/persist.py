"""Embedding CSV (``index,cluster,y1,y2``) and small JSON helpers."""
from __future__ import annotations

import csv
import json

import numpy as np

from .errors import ParseError

EMBEDDING_HEADER = ["index", "cluster", "y1", "y2"]


def save_embedding_csv(path, coords, index=None, cluster=None) -> None:
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    index = np.arange(n) if index is None else np.asarray(index)
    cluster = np.zeros(n, dtype=int) if cluster is None else np.asarray(cluster)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EMBEDDING_HEADER)
        for i in range(n):
            w.writerow([int(index[i]), int(cluster[i]),
                        format(coords[i, 0], ".17g"), format(coords[i, 1], ".17g")])


def load_embedding_csv(path):
    """Return ``(index, cluster, coords)``; a bare two-column file gets default index/cluster."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ParseError(f"{path}: empty embedding file")
    if [c.strip() for c in rows[0]] == EMBEDDING_HEADER:
        body = rows[1:]
        width = 4
    else:
        body = rows[1:] if not _numeric(rows[0]) else rows
        width = len(body[0]) if body else 0
        if width != 2:
            raise ParseError(f"{path}: expected columns {','.join(EMBEDDING_HEADER)} or two coordinates")
    if not body:
        raise ParseError(f"{path}: embedding file has no rows")
    vals = []
    for r, row in enumerate(body):
        if len(row) != width:
            raise ParseError(f"{path}: row {r + 2} has {len(row)} fields, expected {width}")
        try:
            vals.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"{path}: row {r + 2} contains a non-numeric value") from None
    arr = np.asarray(vals)
    if width == 2:
        return np.arange(len(arr)), np.zeros(len(arr), dtype=int), arr
    return arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2:4]


def _numeric(row) -> bool:
    try:
        [float(c) for c in row]
        return True
    except ValueError:
        return False


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
