"""Step 2: embed every cluster on its own (PCA, classical scaling, LOE)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .cluster import ClusterAssignment
from .dissim import DataMatrix, DissimilarityMatrix, _as_points, euclidean_pairwise
from .errors import DegenerateError, DivergenceError, ParameterError, StageError

logger = logging.getLogger(__name__)

PCA = "pca"
CLASSICAL_SCALING = "classical_scaling"
LOE = "loe"
METHODS = (PCA, CLASSICAL_SCALING, LOE)
# "isomap" is classical scaling fed with geodesic dissimilarities
ALIASES = {"isomap": CLASSICAL_SCALING, "cs": CLASSICAL_SCALING, "mds": CLASSICAL_SCALING}

# rows of the (rows, k, m) hinge tensor evaluated at once
_LOE_BLOCK = 256


@dataclass
class LoeConfig:
    k: int = 10
    nu: float = 1e-6
    learning_rate: float = 1e-2
    epochs: int = 500
    seed: int = 0
    jitter: float = 1e-4

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"LOE k must be >= 1, got {self.k}")
        if not self.nu > 0:
            raise ParameterError(f"LOE margin nu must be positive, got {self.nu}")
        if not self.learning_rate > 0:
            raise ParameterError("LOE learning rate must be positive")
        if self.epochs < 1:
            raise ParameterError("LOE needs at least one epoch")


@dataclass
class ClusterEmbedding:
    coords: list
    members: list
    method: str
    gammas: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def kappa(self) -> int:
        return len(self.coords)

    def assemble(self, n: Optional[int] = None) -> np.ndarray:
        """Stack per-cluster coordinates back into point order (untransformed)."""
        n = sum(len(m) for m in self.members) if n is None else n
        out = np.zeros((n, 2))
        for idx, y in zip(self.members, self.coords):
            out[idx] = y
        return out


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    pivot = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca_embed(cluster_points) -> np.ndarray:
    x = _as_points(cluster_points)
    m, d = x.shape
    out = np.zeros((m, 2))
    if m == 1:
        return out
    centered = x - x.mean(axis=0)
    # right singular vectors = covariance eigenvectors, already in descending order
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    r = min(2, vt.shape[0])
    directions = _fix_signs(vt[:r].T)
    out[:, :r] = centered @ directions
    return out


def classical_scaling_embed(cluster_delta) -> np.ndarray:
    delta = cluster_delta.delta if isinstance(cluster_delta, DissimilarityMatrix) else np.asarray(cluster_delta, float)
    m = delta.shape[0]
    out = np.zeros((m, 2))
    if m == 1:
        return out
    sq = delta ** 2
    gram = sq - sq.mean(axis=0) - sq.mean(axis=1)[:, None] + sq.mean()
    gram = -0.5 * (gram + gram.T) / 2
    evals, evecs = np.linalg.eigh(gram)
    top = np.argsort(evals, kind="stable")[::-1][:2]
    lam = np.clip(evals[top], 0.0, None)
    vecs = _fix_signs(evecs[:, top])
    out[:, :len(top)] = vecs * np.sqrt(lam)
    return out


def _knn_sets(delta: np.ndarray, k: int) -> np.ndarray:
    m = delta.shape[0]
    d = delta.astype(float).copy()
    d[np.arange(m), np.arange(m)] = np.inf
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def loe_loss_and_grad(y: np.ndarray, neighbors: np.ndarray, nu: float, need_grad: bool = True):
    """Squared-hinge ordinal loss and its gradient.

    For every point i, neighbour j and non-neighbour l != i the term
    ``max(0, |y_i - y_j| + nu - |y_i - y_l|)**2`` is added.
    """
    m, k = neighbors.shape
    dist = squareform(pdist(y))
    nonnb = np.ones((m, m), dtype=bool)
    nonnb[np.arange(m), np.arange(m)] = False
    nonnb[np.repeat(np.arange(m), k), neighbors.ravel()] = False

    loss = 0.0
    weights = np.zeros((m, m)) if need_grad else None
    for start in range(0, m, _LOE_BLOCK):
        rows = np.arange(start, min(start + _LOE_BLOCK, m))
        d_nb = dist[rows[:, None], neighbors[rows]]                     # (b, k)
        h = d_nb[:, :, None] + nu - dist[rows][:, None, :]              # (b, k, m)
        h = np.where(nonnb[rows][:, None, :], np.maximum(h, 0.0), 0.0)
        loss += float(np.sum(h * h))
        if need_grad:
            a = 2.0 * h.sum(axis=2)                                     # pull i toward j
            b = 2.0 * h.sum(axis=1)                                     # push i away from l
            np.add.at(weights, (np.repeat(rows, k), neighbors[rows].ravel()), a.ravel())
            weights[rows] -= b
    if not need_grad:
        return loss, None
    sym = weights + weights.T
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(dist > 0, sym / dist, 0.0)
    grad = coef.sum(axis=1)[:, None] * y - coef @ y
    return loss, grad


def loe_embed(cluster_points, config: Optional[LoeConfig] = None, *, delta=None,
              init: Optional[np.ndarray] = None) -> np.ndarray:
    """Local ordinal embedding by full-batch gradient descent.

    Neighbour sets come from ``delta`` (Euclidean on the points when omitted). The start
    is ``init`` if given, otherwise PCA plus seeded jitter. Coordinates are rescaled to
    unit RMS for the descent and mapped back to the starting scale on return. A step
    that raises the loss by more than 1e-12 is rejected and the step size halved.
    ``loe_embed.last_history`` keeps the accepted loss values.
    """
    config = config or LoeConfig()
    x = _as_points(cluster_points)
    m = x.shape[0]
    if m < config.k + 2:
        raise ParameterError(f"LOE needs at least k+2={config.k + 2} points, cluster has {m}")
    if delta is None:
        dmat = euclidean_pairwise(x).delta
    else:
        dmat = delta.delta if isinstance(delta, DissimilarityMatrix) else np.asarray(delta, float)
    neighbors = _knn_sets(dmat, config.k)

    if init is None:
        y = pca_embed(x)
        rng = np.random.default_rng(config.seed)
        scale = np.sqrt(np.mean(np.sum(y ** 2, axis=1))) or 1.0
        y = y + config.jitter * scale * rng.standard_normal(y.shape)
    else:
        y = np.array(init, dtype=float)
    center = y.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((y - center) ** 2, axis=1)))
    if rms == 0:
        raise DegenerateError("LOE initialisation collapses to a single point")
    y = (y - center) / rms

    lr = config.learning_rate
    loss, grad = loe_loss_and_grad(y, neighbors, config.nu)
    history = [loss]
    for epoch in range(1, config.epochs + 1):
        if not np.isfinite(loss):
            raise DivergenceError(f"LOE loss became non-finite at epoch {epoch - 1}")
        if loss == 0.0:
            break
        candidate = y - lr * grad
        new_loss, new_grad = loe_loss_and_grad(candidate, neighbors, config.nu)
        if not np.isfinite(new_loss):
            raise DivergenceError(f"LOE loss became non-finite at epoch {epoch}")
        if new_loss > loss + 1e-12:
            lr *= 0.5
            continue
        y, loss, grad = candidate, new_loss, new_grad
        history.append(loss)
    loe_embed.last_history = history
    return y * rms + center


def scale_sync(cluster_delta, coords: np.ndarray) -> float:
    """Least-squares scale matching embedded distances to the dissimilarities."""
    delta = cluster_delta.delta if isinstance(cluster_delta, DissimilarityMatrix) else np.asarray(cluster_delta, float)
    dist = pdist(np.asarray(coords, float))
    iu = np.triu_indices(delta.shape[0], 1)
    denom = float(np.dot(dist, dist))
    if denom == 0:
        raise DegenerateError("all embedded points coincide; scale is undefined")
    return float(np.dot(delta[iu], dist) / denom)


def embed_all_clusters(data: DataMatrix, delta: DissimilarityMatrix,
                       assignment: ClusterAssignment, method: str = PCA,
                       config: Optional[LoeConfig] = None) -> ClusterEmbedding:
    """Embed each cluster separately; LOE outputs are rescaled by their gamma."""
    method = ALIASES.get(method, method)
    if method not in METHODS:
        raise ParameterError(f"unknown embedding method {method!r}")
    coords, members = [], []
    gammas = np.ones(assignment.kappa) if method == LOE else None
    for c in range(assignment.kappa):
        idx = assignment.members(c)
        try:
            if method == PCA:
                y = pca_embed(data.points[idx])
            elif method == CLASSICAL_SCALING:
                y = classical_scaling_embed(delta.delta[np.ix_(idx, idx)])
            else:
                sub = delta.delta[np.ix_(idx, idx)]
                y = loe_embed(data.points[idx], config, delta=sub)
                y = y - y.mean(axis=0)
                gammas[c] = scale_sync(sub, y)
                y = gammas[c] * y
        except Exception as exc:  # noqa: BLE001 - re-raised with the cluster id attached
            raise StageError(f"embed cluster {c}", exc) from exc
        coords.append(y)
        members.append(idx)
    return ClusterEmbedding(coords, members, method, gammas)
