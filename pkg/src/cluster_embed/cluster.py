"""Step 1: partition the data (k-means, DBSCAN) and drop noise points."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .dissim import DataMatrix, DissimilarityMatrix, _as_points
from .errors import EmptyResultError, InvalidInputError, ParameterError

logger = logging.getLogger(__name__)

NOISE = -1


@dataclass
class ClusterAssignment:
    assignment: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        if a.ndim != 1:
            raise InvalidInputError("assignment must be a 1-D vector")
        ids = np.unique(a[a != NOISE])
        if ids.size == 0:
            raise EmptyResultError("every point is marked as noise")
        if np.any(a < NOISE) or not np.array_equal(ids, np.arange(ids.size)):
            raise InvalidInputError("cluster ids must be exactly 0..kappa-1 (or NOISE)")
        self.assignment = a

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def kappa(self) -> int:
        return int(self.assignment.max()) + 1

    @property
    def kept_indices(self) -> np.ndarray:
        return np.flatnonzero(self.assignment != NOISE)

    @property
    def noise_indices(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == NOISE)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == c)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment[self.assignment != NOISE], minlength=self.kappa)


def _relabel_by_first_occurrence(labels: np.ndarray) -> np.ndarray:
    out = np.full_like(labels, NOISE)
    next_id = 0
    mapping = {}
    for i, lab in enumerate(labels):
        if lab == NOISE:
            continue
        if lab not in mapping:
            mapping[lab] = next_id
            next_id += 1
        out[i] = mapping[lab]
    return out


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # fewer distinct points than k; pick any point, empty-cluster repair follows
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[c] = x[idx]
        closest = np.minimum(closest, np.sum((x - centers[c]) ** 2, axis=1))
    return centers


def kmeans(data, k: int, seed: int = 0, max_iter: int = 300) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are reseeded at the point farthest from its current centre, so the
    result always has exactly ``k`` non-empty clusters (when there are ``k`` points).
    ``info["objective"]`` records the within-cluster sum of squares after every
    assignment step.
    """
    x = _as_points(data)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)

    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = cdist(x, centers, "sqeuclidean")
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=k)
        taken = set()
        for c in np.flatnonzero(counts == 0):
            point_d2 = d2[np.arange(n), new]
            # never steal the only member of another cluster
            singleton = counts[new] <= 1
            point_d2 = np.where(singleton, -1.0, point_d2)
            for t in taken:
                point_d2[t] = -1.0
            far = int(np.argmax(point_d2))
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
            centers[c] = x[far]
            taken.add(far)
            d2[far, c] = 0.0
        history.append(float(d2[np.arange(n), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[c] = x[labels == c].mean(axis=0)
    inertia = float(np.sum((x - centers[labels]) ** 2))
    history.append(inertia)
    return ClusterAssignment(labels, {"method": "kmeans", "n_iter": n_iter,
                                      "objective": history, "centers": centers})


def dbscan(data, eps: float, min_pts: int) -> ClusterAssignment:
    """Density-based clustering on Euclidean distances.

    A point is core when at least ``min_pts`` points (itself included) lie within
    ``eps``. Clusters are the connected components of core points; each border point
    joins the cluster of its nearest core point, which keeps the result independent of
    input order. Cluster ids follow the smallest member index.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ParameterError(f"min_pts must be >= 1, got {min_pts}")
    x = _as_points(data)
    n = x.shape[0]
    tree = cKDTree(x)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    counts = np.ones(n, dtype=int)
    np.add.at(counts, pairs[:, 0], 1)
    np.add.at(counts, pairs[:, 1], 1)
    core = counts >= min_pts

    labels = np.full(n, NOISE)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        raise EmptyResultError("DBSCAN found no core points; every point is noise")
    both = core[pairs[:, 0]] & core[pairs[:, 1]]
    cp = pairs[both]
    adj = sp.coo_matrix((np.ones(len(cp)), (cp[:, 0], cp[:, 1])), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    labels[core] = comp[core]

    border = np.flatnonzero(~core)
    if border.size and len(pairs):
        one = core[pairs[:, 0]] & ~core[pairs[:, 1]]
        two = ~core[pairs[:, 0]] & core[pairs[:, 1]]
        b_pts = np.concatenate([pairs[one, 1], pairs[two, 0]])
        c_pts = np.concatenate([pairs[one, 0], pairs[two, 1]])
        if b_pts.size:
            dist = np.linalg.norm(x[b_pts] - x[c_pts], axis=1)
            # sort by (border point, distance, core index) and keep the first per border point
            order = np.lexsort((c_pts, dist, b_pts))
            b_sorted = b_pts[order]
            first = np.r_[True, b_sorted[1:] != b_sorted[:-1]]
            labels[b_sorted[first]] = labels[c_pts[order][first]]

    labels = _relabel_by_first_occurrence(labels)
    n_noise = int(np.sum(labels == NOISE))
    if n_noise:
        logger.info("DBSCAN marked %d of %d points as noise", n_noise, n)
    return ClusterAssignment(labels, {"method": "dbscan", "eps": eps, "min_pts": min_pts})


def restrict(data: DataMatrix, delta: DissimilarityMatrix, assignment: ClusterAssignment):
    """Drop noise points, returning consistent (data, delta, assignment) on the survivors."""
    if not (data.n == delta.n == assignment.n):
        raise InvalidInputError(
            f"size mismatch: data {data.n}, delta {delta.n}, assignment {assignment.n}")
    keep = assignment.kept_indices
    if keep.size == 0:
        raise EmptyResultError("all points are noise")
    if keep.size == data.n:
        return data, delta, assignment
    info = dict(assignment.info, original_indices=keep)
    return (data.subset(keep), delta.submatrix(keep),
            ClusterAssignment(assignment.assignment[keep], info))


def save_assignment_csv(assignment: ClusterAssignment, path, index=None) -> None:
    index = np.arange(assignment.n) if index is None else np.asarray(index)
    with open(path, "w", newline="") as fh:
        fh.write("index,cluster\n")
        for i, c in zip(index, assignment.assignment):
            fh.write(f"{int(i)},{int(c)}\n")


def load_assignment_csv(path) -> ClusterAssignment:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, dtype=int, ndmin=2)
    order = np.argsort(raw[:, 0])
    return ClusterAssignment(raw[order, 1])
