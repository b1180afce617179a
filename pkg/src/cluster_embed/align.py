"""Step 3: rigid alignment of the cluster embeddings under an alpha-scaled stress."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from . import _kernels
from .cluster import ClusterAssignment
from .dissim import DissimilarityMatrix
from .embed import ClusterEmbedding, classical_scaling_embed
from .errors import ParameterError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

MEAN_PAIRWISE = "mean_pairwise"
MAX_PAIRWISE = "max_pairwise"


@dataclass
class RigidTransform:
    """x -> diag(1, (-1)**pi_flag) @ [[cos, sin], [-sin, cos]] @ x + v"""

    theta: float = 0.0
    pi_flag: int = 0
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.theta = float(self.theta) % TWO_PI
        if self.theta >= TWO_PI:  # rounding of values just below 0
            self.theta = 0.0
        if self.pi_flag not in (0, 1):
            raise ParameterError(f"pi_flag must be 0 or 1, got {self.pi_flag}")
        self.pi_flag = int(self.pi_flag)
        self.v = np.asarray(self.v, dtype=float).reshape(2)

    def matrix(self) -> np.ndarray:
        return _rigid_matrix(self.theta, self.pi_flag)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "pi": self.pi_flag, "v": [float(self.v[0]), float(self.v[1])]}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(d["theta"], d["pi"], d["v"])


def _rigid_matrix(theta: float, pi_flag: int) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, s], [-s, c]])
    if pi_flag:
        rot[1] *= -1.0
    return rot


def apply_transform(t: RigidTransform, coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    return coords @ t.matrix().T + t.v


@dataclass
class AlignmentConfig:
    alpha: float = 1.0
    theta_grid: int = 64
    sweeps: int = 50
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ParameterError(f"alpha must be >= 1, got {self.alpha}")
        if self.theta_grid < 4:
            raise ParameterError("theta_grid must be >= 4")
        if self.sweeps < 1:
            raise ParameterError("sweeps must be >= 1")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")


@dataclass
class ClusterGeometry:
    kappa: int
    tau: float
    Delta: Optional[float]
    Delta_pairs: np.ndarray


@dataclass
class GlobalEmbedding:
    coords: np.ndarray
    transforms: list
    final_stress: float
    alpha_used: float
    cluster: np.ndarray
    initial_stress: float = 0.0
    history: list = field(default_factory=list)


def _delta_array(delta) -> np.ndarray:
    return delta.delta if isinstance(delta, DissimilarityMatrix) else np.asarray(delta, float)


def _members(assignment, cluster_embedding=None):
    if cluster_embedding is not None:
        return [np.asarray(m) for m in cluster_embedding.members]
    return [assignment.members(c) for c in range(assignment.kappa)]


def stress(delta, assignment: ClusterAssignment, coords_by_cluster, transforms, alpha: float = 1.0) -> float:
    """Cross-cluster stress sum (alpha*delta_lm - |T_i(y_l) - T_j(y_m)|)^2 over i < j."""
    dmat = _delta_array(delta)
    members = [assignment.members(c) for c in range(assignment.kappa)]
    moved = [apply_transform(t, y) for t, y in zip(transforms, coords_by_cluster)]
    total = 0.0
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            d = cdist(moved[i], moved[j])
            r = alpha * dmat[np.ix_(members[i], members[j])] - d
            total += float(np.sum(r * r))
    return total


def cluster_distances(delta, members) -> np.ndarray:
    """kappa x kappa matrix of mean cross-cluster dissimilarities (zero diagonal)."""
    dmat = _delta_array(delta)
    kappa = len(members)
    out = np.zeros((kappa, kappa))
    for i in range(kappa):
        for j in range(i + 1, kappa):
            out[i, j] = out[j, i] = dmat[np.ix_(members[i], members[j])].mean()
    return out


def cluster_diameter(coords: np.ndarray, how: str = MEAN_PAIRWISE) -> float:
    if len(coords) < 2:
        return 0.0
    dist = pdist(coords)
    if how == MEAN_PAIRWISE:
        # effective diameter; ~0.9 of the true diameter for a uniform disk
        return 2.0 * float(dist.mean())
    if how == MAX_PAIRWISE:
        return float(dist.max())
    raise ParameterError(f"unknown diameter notion {how!r}")


def cluster_geometry(delta, assignment: ClusterAssignment, cluster_embedding: ClusterEmbedding,
                     diameter: str = MEAN_PAIRWISE) -> ClusterGeometry:
    """Average embedded cluster diameter and inter-cluster dissimilarities.

    ``Delta`` is the sum of the ``kappa*(kappa-1)/2`` distinct ``Delta_ij`` divided by
    ``kappa*(kappa-1)``, i.e. half their mean; it is ``None`` for a single cluster.
    """
    members = _members(assignment, cluster_embedding)
    kappa = len(members)
    pairs = cluster_distances(delta, members)
    tau = float(np.mean([cluster_diameter(y, diameter) for y in cluster_embedding.coords]))
    if kappa < 2:
        return ClusterGeometry(kappa, tau, None, pairs)
    iu = np.triu_indices(kappa, 1)
    Delta = float(pairs[iu].sum() / (kappa * (kappa - 1)))
    return ClusterGeometry(kappa, tau, Delta, pairs)


def alpha_heuristic(geometry: ClusterGeometry) -> float:
    if geometry.Delta is None or geometry.Delta <= 0:
        return 1.0
    return max(1.0, geometry.kappa * geometry.tau / (TWO_PI * geometry.Delta))


def _centroid_layout(pairs: np.ndarray, alpha: float) -> np.ndarray:
    return classical_scaling_embed(alpha * pairs)


def initialize_transforms(delta, assignment: ClusterAssignment, cluster_embedding: ClusterEmbedding,
                          alpha: float = 1.0) -> list:
    """Place cluster centroids on a classical-scaling layout of alpha * Delta_ij.

    The largest cluster keeps the identity transform; the layout is shifted so that
    its centroid lands where the identity leaves it.
    """
    members = _members(assignment, cluster_embedding)
    kappa = len(members)
    if kappa == 1:
        return [RigidTransform()]
    layout = _centroid_layout(cluster_distances(delta, members), alpha)
    centroids = [y.mean(axis=0) for y in cluster_embedding.coords]
    ref = _reference_cluster(members)
    shift = centroids[ref] - layout[ref]
    return [RigidTransform() if c == ref else RigidTransform(0.0, 0, layout[c] + shift - centroids[c])
            for c in range(kappa)]


def _reference_cluster(members) -> int:
    sizes = np.array([len(m) for m in members])
    return int(np.argmax(sizes))  # first among equals


class _Aligner:
    """Alternating minimisation state over (theta, pi, translation) per cluster.

    Works on centred cluster coordinates; ``w`` is where the centroid is sent, so the
    public translation is ``v = w - A @ centroid``.
    """

    def __init__(self, dmat, members, coords, transforms, alpha, theta_grid):
        self.members = members
        self.alpha = alpha
        self.centroids = [y.mean(axis=0) for y in coords]
        self.centred = [np.ascontiguousarray(y - c) for y, c in zip(coords, self.centroids)]
        self.theta = [t.theta for t in transforms]
        self.flip = [t.pi_flag for t in transforms]
        self.w = [t.v + t.matrix() @ c for t, c in zip(transforms, self.centroids)]
        self.dmat = dmat
        self.grid = np.arange(theta_grid) * (TWO_PI / theta_grid)
        self.step = TWO_PI / theta_grid
        self.placed = [self._place(i) for i in range(len(members))]

    def _place(self, i):
        a = _rigid_matrix(self.theta[i], self.flip[i])
        return np.ascontiguousarray(self.centred[i] @ a.T + self.w[i])

    def transforms(self):
        out = []
        for i in range(len(self.members)):
            a = _rigid_matrix(self.theta[i], self.flip[i])
            out.append(RigidTransform(self.theta[i], self.flip[i], self.w[i] - a @ self.centroids[i]))
        return out

    def total(self) -> float:
        s = 0.0
        for i in range(len(self.members)):
            for j in range(i + 1, len(self.members)):
                target = self.alpha * self.dmat[np.ix_(self.members[i], self.members[j])]
                s += _kernels.partial_stress(self.placed[i], self.placed[j], target)
        return s

    def _others(self, i):
        rest = [j for j in range(len(self.members)) if j != i]
        idx = np.concatenate([self.members[j] for j in rest])
        z = np.ascontiguousarray(np.concatenate([self.placed[j] for j in rest]))
        target = np.ascontiguousarray(self.alpha * self.dmat[np.ix_(self.members[i], idx)])
        return z, target

    def _golden(self, c, w, flip, lo, hi, z, target, tol=1e-10):
        f = lambda t: _kernels.rotated_stress(c, w, flip, t, z, target)  # noqa: E731
        a, b = lo, hi
        x1 = b - _INV_PHI * (b - a)
        x2 = a + _INV_PHI * (b - a)
        f1, f2 = f(x1), f(x2)
        while b - a > tol:
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - _INV_PHI * (b - a)
                f1 = f(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + _INV_PHI * (b - a)
                f2 = f(x2)
        return (x1, f1) if f1 <= f2 else (x2, f2)

    def update(self, i) -> float:
        z, target = self._others(i)
        c = self.centred[i]
        current = _kernels.rotated_stress(c, self.w[i], self.flip[i], self.theta[i], z, target)

        # rotation and reflection: angle grid under both flips, then golden-section
        # refinement inside the winning grid cell
        scans = [_kernels.angle_scan(c, self.w[i], flip, self.grid, z, target) for flip in (0, 1)]
        flip = int(scans[1].min() < scans[0].min())
        g = int(np.argmin(scans[flip]))
        theta, val = self._golden(c, self.w[i], flip, self.grid[g] - self.step,
                                  self.grid[g] + self.step, z, target)
        if scans[flip][g] < val:
            theta, val = self.grid[g], scans[flip][g]
        if val < current:
            current, self.theta[i], self.flip[i] = val, theta % TWO_PI, flip

        # translation: quasi-Newton on the centroid position
        p0 = self._place(i) - self.w[i]

        def fun(w):
            s, gx, gy = _kernels.partial_stress_grad(p0 + w, z, target)
            return s, np.array([gx, gy])

        res = minimize(fun, self.w[i], jac=True, method="BFGS")
        if np.all(np.isfinite(res.x)) and res.fun < current:
            self.w[i] = np.asarray(res.x, dtype=float)
            current = float(res.fun)
        self.placed[i] = self._place(i)
        return current


def align(delta, assignment: ClusterAssignment, cluster_embedding: ClusterEmbedding,
          config: Optional[AlignmentConfig] = None, transforms: Optional[list] = None) -> GlobalEmbedding:
    """Rigidly position the cluster embeddings to minimise the alpha-scaled stress.

    The largest cluster stays at the identity; the others are revisited in decreasing
    size order, each time re-optimising angle, reflection and translation. Every
    coordinate step only accepts a non-increasing stress, so ``history`` (stress after
    initialisation and after each sweep) is monotone.
    """
    config = config or AlignmentConfig()
    dmat = _delta_array(delta)
    members = _members(assignment, cluster_embedding)
    kappa = len(members)
    n = sum(len(m) for m in members)
    labels = np.empty(n, dtype=int)
    for c, idx in enumerate(members):
        labels[idx] = c

    if kappa == 1:
        coords = cluster_embedding.assemble(n)
        return GlobalEmbedding(coords, [RigidTransform()], 0.0, config.alpha, labels, 0.0, [0.0])

    if transforms is None:
        transforms = initialize_transforms(dmat, assignment, cluster_embedding, config.alpha)
    state = _Aligner(dmat, members, [np.asarray(y, float) for y in cluster_embedding.coords],
                     transforms, config.alpha, config.theta_grid)
    ref = _reference_cluster(members)
    sizes = np.array([len(m) for m in members])
    order = [int(c) for c in np.argsort(-sizes, kind="stable") if c != ref]

    history = [state.total()]
    logger.debug("alignment start: stress %.6g", history[0])
    for sweep in range(config.sweeps):
        for c in order:
            state.update(c)
        s = state.total()
        history.append(s)
        logger.debug("sweep %d: stress %.6g", sweep + 1, s)
        prev = history[-2]
        if prev == 0 or (prev - s) / prev < config.tol:
            break

    out = state.transforms()
    out[ref] = transforms[ref]  # never updated; avoid round-off from the centred form
    coords = np.zeros((n, 2))
    for idx, y, t in zip(members, cluster_embedding.coords, out):
        coords[idx] = apply_transform(t, y)
    return GlobalEmbedding(coords, out, history[-1], config.alpha, labels, history[0], history)


def save_transforms_json(transforms, path) -> None:
    with open(path, "w") as fh:
        json.dump([t.to_dict() for t in transforms], fh, indent=2)
        fh.write("\n")


def load_transforms_json(path) -> list:
    with open(path) as fh:
        return [RigidTransform.from_dict(d) for d in json.load(fh)]
