"""Embedding quality metrics: kNN recall, Spearman, normalized stress, class preservation, Rand."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import rankdata

from .align import cluster_distances
from .dissim import DissimilarityMatrix
from .errors import DegenerateError, InvalidInputError, ParameterError

GLOBAL = "global"
CLUSTERWISE = "clusterwise"


@dataclass
class MetricsReport:
    knn_recall: dict = field(default_factory=dict)
    spearman_global: Optional[float] = None
    spearman_clusterwise_mean: Optional[float] = None
    stress_global: Optional[float] = None
    stress_clusterwise_mean: Optional[float] = None
    class_preservation: Optional[float] = None
    rand_index: Optional[float] = None
    alpha_used: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["knn_recall"] = {str(k): v for k, v in sorted(self.knn_recall.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _delta(delta_orig) -> np.ndarray:
    d = delta_orig.delta if isinstance(delta_orig, DissimilarityMatrix) else np.asarray(delta_orig, float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidInputError(f"dissimilarity matrix must be square, got {d.shape}")
    return d


def _check_sizes(delta: np.ndarray, coords: np.ndarray):
    if delta.shape[0] != coords.shape[0]:
        raise InvalidInputError(f"size mismatch: {delta.shape[0]} dissimilarities vs {coords.shape[0]} points")


def _knn_indices(dist: np.ndarray, k: int) -> np.ndarray:
    d = dist.copy()
    n = d.shape[0]
    d[np.arange(n), np.arange(n)] = np.inf
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def knn_recall(delta_orig, coords, k: int) -> float:
    delta = _delta(delta_orig)
    coords = np.asarray(coords, float)
    _check_sizes(delta, coords)
    n = delta.shape[0]
    if not 1 <= k <= n - 1:
        raise ParameterError(f"k must be in [1, {n - 1}], got {k}")
    orig = _knn_indices(delta, k)
    emb = _knn_indices(squareform(pdist(coords)), k)
    hits = 0
    for i in range(n):
        hits += np.intersect1d(orig[i], emb[i], assume_unique=True).size
    return hits / (n * k)


def _spearman(a: np.ndarray, b: np.ndarray) -> float:
    if a.size < 2:
        raise DegenerateError("rank correlation needs at least two pairs")
    ra = rankdata(a)
    rb = rankdata(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
    if denom == 0:
        raise DegenerateError("rank correlation undefined for a constant vector")
    return float(np.clip(np.dot(ra, rb) / denom, -1.0, 1.0))


def _groups(labels, n):
    if labels is None:
        raise InvalidInputError("clusterwise scope needs labels")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InvalidInputError("labels length does not match the number of points")
    return [np.flatnonzero(labels == c) for c in np.unique(labels)]


def _pairs(delta, dist, idx=None):
    if idx is not None:
        delta = delta[np.ix_(idx, idx)]
        dist = dist[np.ix_(idx, idx)]
    iu = np.triu_indices(delta.shape[0], 1)
    return delta[iu], dist[iu]


def spearman(delta_orig, coords, scope: str = GLOBAL, labels=None) -> float:
    """Rank correlation of original dissimilarities and embedded distances.

    With ``scope="clusterwise"`` the correlation is taken within each label class
    (classes with fewer than three points are skipped) and averaged.
    """
    delta = _delta(delta_orig)
    coords = np.asarray(coords, float)
    _check_sizes(delta, coords)
    dist = squareform(pdist(coords))
    if scope == GLOBAL:
        return _spearman(*_pairs(delta, dist))
    if scope != CLUSTERWISE:
        raise ParameterError(f"unknown scope {scope!r}")
    vals = [_spearman(*_pairs(delta, dist, g)) for g in _groups(labels, delta.shape[0]) if g.size >= 3]
    if not vals:
        raise DegenerateError("no class has enough points for a rank correlation")
    return float(np.mean(vals))


def _nstress(d_orig, d_emb) -> float:
    denom = float(np.dot(d_orig, d_orig))
    if d_orig.size == 0 or denom == 0:
        raise DegenerateError("normalized stress undefined when all dissimilarities are zero")
    r = d_orig - d_emb
    return float(np.dot(r, r) / denom)


def normalized_stress(delta_orig, coords, scope: str = GLOBAL, labels=None) -> float:
    """sum (delta - d)^2 / sum delta^2 over pairs in scope (no square root)."""
    delta = _delta(delta_orig)
    coords = np.asarray(coords, float)
    _check_sizes(delta, coords)
    dist = squareform(pdist(coords))
    if scope == GLOBAL:
        return _nstress(*_pairs(delta, dist))
    if scope != CLUSTERWISE:
        raise ParameterError(f"unknown scope {scope!r}")
    vals = [_nstress(*_pairs(delta, dist, g)) for g in _groups(labels, delta.shape[0]) if g.size >= 2]
    if not vals:
        raise DegenerateError("no class has a pair of points")
    return float(np.mean(vals))


def class_preservation(delta_orig, coords, labels) -> float:
    delta = _delta(delta_orig)
    coords = np.asarray(coords, float)
    _check_sizes(delta, coords)
    groups = _groups(labels, delta.shape[0])
    if len(groups) < 3:
        raise DegenerateError(f"class preservation needs >= 3 classes, got {len(groups)}")
    iu = np.triu_indices(len(groups), 1)
    orig = cluster_distances(delta, groups)[iu]
    emb = cluster_distances(squareform(pdist(coords)), groups)[iu]
    return _spearman(orig, emb)


def rand_index(a, b) -> float:
    """Fraction of unordered point pairs on which two partitions agree."""
    a = np.asarray(getattr(a, "assignment", a))
    b = np.asarray(getattr(b, "assignment", b))
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidInputError("partitions must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise DegenerateError("Rand index needs at least two points")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return int(np.sum(x * (x - 1) // 2))

    same_both = pairs(table)
    same_a = pairs(table.sum(axis=1))
    same_b = pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    agree = total + 2 * same_both - same_a - same_b
    return agree / total


def evaluate(delta_orig, coords, labels=None, k_list=(5, 10, 20), assignment=None,
             alpha_used=None) -> MetricsReport:
    """Compute the full report; label-dependent fields stay ``None`` without labels."""
    delta = _delta(delta_orig)
    n = delta.shape[0]
    report = MetricsReport(alpha_used=alpha_used)
    for k in k_list:
        if 1 <= k <= n - 1:
            report.knn_recall[int(k)] = knn_recall(delta, coords, int(k))
    report.spearman_global = spearman(delta, coords)
    report.stress_global = normalized_stress(delta, coords)
    if labels is not None:
        report.spearman_clusterwise_mean = _maybe(spearman, delta, coords, CLUSTERWISE, labels)
        report.stress_clusterwise_mean = _maybe(normalized_stress, delta, coords, CLUSTERWISE, labels)
        report.class_preservation = _maybe(class_preservation, delta, coords, labels)
        if assignment is not None:
            report.rand_index = rand_index(assignment, labels)
    return report


def _maybe(fn, *args):
    try:
        return fn(*args)
    except DegenerateError:
        return None
