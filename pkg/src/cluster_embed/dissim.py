"""Pairwise dissimilarities: Euclidean and kNN-graph geodesic (Isomap style)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial.distance import cdist

from .errors import InvalidInputError, ParameterError

logger = logging.getLogger(__name__)

EUCLIDEAN = "euclidean"
GEODESIC = "geodesic"

# rows per block when scanning neighbours; bounds memory at ~block*n doubles
_BLOCK = 512


@dataclass
class DataMatrix:
    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.isfinite(pts))[0, 0])
            raise InvalidInputError(f"non-finite entry in row {bad}")
        self.points = pts
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (pts.shape[0],):
                raise InvalidInputError(
                    f"labels length {labels.shape} does not match {pts.shape[0]} points")
            self.labels = labels.astype(int)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "DataMatrix":
        idx = np.asarray(idx, dtype=int)
        labels = None if self.labels is None else self.labels[idx]
        return DataMatrix(self.points[idx], labels)


@dataclass
class DissimilarityMatrix:
    delta: np.ndarray
    kind: str = EUCLIDEAN

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        if delta.ndim != 2 or delta.shape[0] != delta.shape[1]:
            raise InvalidInputError(f"dissimilarity matrix must be square, got {delta.shape}")
        if not np.all(np.isfinite(delta)) or np.any(delta < 0):
            raise InvalidInputError("dissimilarities must be finite and non-negative")
        if np.any(np.diag(delta) != 0):
            raise InvalidInputError("dissimilarity matrix must have a zero diagonal")
        if not np.array_equal(delta, delta.T):
            raise InvalidInputError("dissimilarity matrix must be symmetric")
        self.delta = delta

    @property
    def n(self) -> int:
        return self.delta.shape[0]

    def submatrix(self, idx) -> "DissimilarityMatrix":
        idx = np.asarray(idx, dtype=int)
        return DissimilarityMatrix(self.delta[np.ix_(idx, idx)], self.kind)


@dataclass
class KnnGraph:
    """Directed kNN lists; ``indices[i]`` are the neighbours of point i, nearest first."""

    indices: np.ndarray
    weights: np.ndarray
    k: int
    points: np.ndarray

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    def neighbor_lists(self) -> dict[int, list[int]]:
        return {i: self.indices[i].tolist() for i in range(self.n)}


def _as_points(data) -> np.ndarray:
    if isinstance(data, DataMatrix):
        return data.points
    return DataMatrix(data).points


def euclidean_pairwise(data) -> DissimilarityMatrix:
    x = _as_points(data)
    delta = cdist(x, x)
    # cdist is not bitwise symmetric for all inputs
    delta = np.triu(delta, 1)
    delta = delta + delta.T
    return DissimilarityMatrix(delta, EUCLIDEAN)


def build_knn_graph(data, k: int) -> KnnGraph:
    """Exact kNN lists by Euclidean distance; ties go to the lower point index."""
    x = _as_points(data)
    n = x.shape[0]
    if not 1 <= k <= n - 1:
        raise ParameterError(f"k must be in [1, {n - 1}], got {k}")
    indices = np.empty((n, k), dtype=np.int64)
    weights = np.empty((n, k))
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        block = cdist(x[start:stop], x)
        rows = np.arange(stop - start)
        block[rows, rows + start] = np.inf
        # stable sort keeps ascending index order among equal distances
        order = np.argsort(block, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        weights[start:stop] = np.take_along_axis(block, order, axis=1)
    return KnnGraph(indices, weights, k, x)


def _undirected_edges(graph: KnnGraph):
    n, k = graph.indices.shape
    src = np.repeat(np.arange(n), k)
    dst = graph.indices.ravel()
    w = graph.weights.ravel()
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * n + hi
    # an edge present in both directions carries the same weight; keep one copy
    _, first = np.unique(key, return_index=True)
    return lo[first], hi[first], w[first]


def bridge_components(graph: KnnGraph, rows=None, cols=None, weights=None):
    """Minimum-Euclidean cross edges joining every pair of connected components.

    Returns ``(i, j, w)`` arrays of the added edges (empty when the graph is connected).
    """
    if rows is None:
        rows, cols, weights = _undirected_edges(graph)
    n = graph.n
    adj = sp.csr_matrix((np.ones_like(weights), (rows, cols)), shape=(n, n))
    ncomp, comp = connected_components(adj, directed=False)
    added_i, added_j, added_w = [], [], []
    if ncomp > 1:
        members = [np.flatnonzero(comp == c) for c in range(ncomp)]
        for a in range(ncomp):
            for b in range(a + 1, ncomp):
                block = cdist(graph.points[members[a]], graph.points[members[b]])
                flat = int(np.argmin(block))  # row-major argmin: lowest index pair on ties
                r, c = divmod(flat, block.shape[1])
                i, j = int(members[a][r]), int(members[b][c])
                added_i.append(min(i, j))
                added_j.append(max(i, j))
                added_w.append(block[r, c])
        logger.info("kNN graph has %d components; bridged with %d cross edges",
                    ncomp, len(added_w))
    return (np.asarray(added_i, dtype=np.int64), np.asarray(added_j, dtype=np.int64),
            np.asarray(added_w, dtype=float))


def geodesic_pairwise(graph: KnnGraph) -> DissimilarityMatrix:
    """All-pairs shortest paths on the union-symmetrized kNN graph.

    Disconnected components are joined first by :func:`bridge_components`, so every
    entry of the result is finite.
    """
    if graph.n == 0 or graph.indices.size == 0:
        raise InvalidInputError("cannot compute geodesics on an empty graph")
    n = graph.n
    rows, cols, w = _undirected_edges(graph)
    bi, bj, bw = bridge_components(graph, rows, cols, w)
    rows = np.concatenate([rows, bi])
    cols = np.concatenate([cols, bj])
    w = np.concatenate([w, bw])
    # explicit zeros (duplicate points) survive csr construction and count as edges
    adj = sp.csr_matrix((w, (rows, cols)), shape=(n, n))
    delta = dijkstra(adj, directed=False)
    delta = np.minimum(delta, delta.T)
    np.fill_diagonal(delta, 0.0)
    return DissimilarityMatrix(delta, GEODESIC)


def save_dissimilarity_csv(dm: DissimilarityMatrix, path) -> None:
    np.savetxt(path, dm.delta, delimiter=",", fmt="%.17g")


def load_dissimilarity_csv(path, kind: str = EUCLIDEAN) -> DissimilarityMatrix:
    delta = np.loadtxt(path, delimiter=",", ndmin=2)
    return DissimilarityMatrix(delta, kind)
