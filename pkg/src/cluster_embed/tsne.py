"""Exact (dense) t-SNE used as a baseline."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .dissim import DataMatrix, DissimilarityMatrix
from .errors import CalibrationError, DivergenceError, ParameterError

logger = logging.getLogger(__name__)

GIVEN = "given_coords"
GAUSSIAN = "seeded_gaussian"

_CHECK_EVERY = 25


@dataclass
class TsneAffinities:
    p: np.ndarray
    sigma: np.ndarray
    perplexity: float


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    learning_rate: float = 200.0
    momentum: float = 0.5
    final_momentum: float = 0.8
    iters: int = 1000
    init: str = GAUSSIAN
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 2:
            raise ParameterError(f"perplexity must be >= 2, got {self.perplexity}")
        if self.exaggeration < 1:
            raise ParameterError("exaggeration must be >= 1")
        if self.iters < 1:
            raise ParameterError("iters must be >= 1")
        if not (0 <= self.momentum < 1 and 0 <= self.final_momentum < 1):
            raise ParameterError("momentum must lie in [0, 1)")
        if self.init not in (GIVEN, GAUSSIAN):
            raise ParameterError(f"unknown init {self.init!r}")


def _distances(data) -> np.ndarray:
    if isinstance(data, DissimilarityMatrix):
        return data.delta
    if isinstance(data, DataMatrix):
        return squareform(pdist(data.points))
    return squareform(pdist(DataMatrix(data).points))


def _row_perplexity(dist_row: np.ndarray, sigma: float):
    """Conditional distribution p_{.|i} and its perplexity 2**H for one bandwidth."""
    logits = -(dist_row ** 2 - dist_row.min() ** 2) / (2.0 * sigma * sigma)
    w = np.exp(logits)
    total = w.sum()
    p = w / total
    # entropy in bits, computed from the logits to stay finite when p underflows
    h = (np.log(total) - np.dot(p, logits)) / np.log(2.0)
    return p, 2.0 ** h


def conditional_entropy_bits(p_row: np.ndarray) -> float:
    nz = p_row[p_row > 0]
    return float(-np.sum(nz * np.log2(nz)))


def calibrate_affinities(data, perplexity: float, tol: float = 1e-3, max_steps: int = 100) -> TsneAffinities:
    """Per-point bandwidth search so that 2**H(p_.|i) matches ``perplexity``.

    The bracket around each sigma grows geometrically until it contains the target; then
    up to ``max_steps`` bisections (in log sigma) run until the relative perplexity
    error is within ``tol``.
    """
    dist = _distances(data)
    n = dist.shape[0]
    if not 2 <= perplexity <= n - 1:
        raise ParameterError(f"perplexity must be in [2, {n - 1}], got {perplexity}")
    target_err = tol * perplexity
    cond = np.zeros((n, n))
    sigma = np.empty(n)
    for i in range(n):
        row = np.delete(dist[i], i)
        positive = row[row > 0]
        s = float(np.median(positive)) if positive.size else 1.0
        p, perp = _row_perplexity(row, s)
        if abs(perp - perplexity) > target_err:
            lo = hi = s
            grow = 0
            while _row_perplexity(row, hi)[1] < perplexity:
                hi *= 2.0
                grow += 1
                if grow > 200:
                    raise CalibrationError(f"no bandwidth bracket found for point {i}")
            grow = 0
            while _row_perplexity(row, lo)[1] > perplexity:
                lo /= 2.0
                grow += 1
                if grow > 200:
                    raise CalibrationError(f"no bandwidth bracket found for point {i}")
            for _ in range(max_steps):
                s = float(np.sqrt(lo * hi))
                p, perp = _row_perplexity(row, s)
                if abs(perp - perplexity) <= target_err:
                    break
                if perp < perplexity:
                    lo = s
                else:
                    hi = s
            if abs(perp - perplexity) > target_err:
                raise CalibrationError(
                    f"perplexity search for point {i} stalled at {perp:.6g} (target {perplexity})")
        sigma[i] = s
        cond[i, np.arange(n) != i] = p
    # cond[i, j] = p_{j|i}
    p_joint = (cond + cond.T) / (2.0 * n)
    return TsneAffinities(p_joint, sigma, float(perplexity))


def _kernel(y: np.ndarray):
    sq = squareform(pdist(y, "sqeuclidean"))
    w = 1.0 / (1.0 + sq)
    np.fill_diagonal(w, 0.0)
    return w


def q_matrix(y: np.ndarray) -> np.ndarray:
    w = _kernel(y)
    return w / w.sum()


def kl_objective(p: np.ndarray, y: np.ndarray, exaggeration: float = 1.0) -> float:
    """KL(P || Q) for normalised P.

    With exaggeration r this is ``sum rP log(rP / w) + log sum w`` (w the Cauchy kernel),
    whose gradient is the usual exaggerated one, ``4 sum (rP - Q) w (y_i - y_j)``.
    """
    w = _kernel(y)
    rp = exaggeration * p
    mask = rp > 0
    return float(np.sum(rp[mask] * np.log(rp[mask] / w[mask])) + np.log(w.sum()))


def kl_gradient(p: np.ndarray, y: np.ndarray, exaggeration: float = 1.0) -> np.ndarray:
    w = _kernel(y)
    q = w / w.sum()
    coef = (exaggeration * p - q) * w
    return 4.0 * (coef.sum(axis=1)[:, None] * y - coef @ y)


def tsne_run(affinities: TsneAffinities, config: Optional[TsneConfig] = None,
             initial_coords: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient descent with momentum on the KL objective.

    During the first ``exaggeration_iters`` iterations P is multiplied by the
    exaggeration factor and the lower momentum is used.
    """
    config = config or TsneConfig()
    p = affinities.p
    n = p.shape[0]
    if initial_coords is not None:
        y = np.array(initial_coords, dtype=float).reshape(n, 2)
    elif config.init == GIVEN:
        raise ParameterError("init='given_coords' requires initial_coords")
    else:
        y = 1e-4 * np.random.default_rng(config.seed).standard_normal((n, 2))
    update = np.zeros_like(y)
    for it in range(config.iters):
        early = it < config.exaggeration_iters
        rho = config.exaggeration if early else 1.0
        mom = config.momentum if early else config.final_momentum
        grad = kl_gradient(p, y, rho)
        update = mom * update - config.learning_rate * grad
        y = y + update
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"t-SNE coordinates became non-finite at iteration {it + 1}")
        if (it + 1) % _CHECK_EVERY == 0 or it + 1 == config.iters:
            obj = kl_objective(p, y, rho)
            if not np.isfinite(obj):
                raise DivergenceError(f"t-SNE objective became non-finite at iteration {it + 1}")
            logger.debug("t-SNE iteration %d: objective %.6g", it + 1, obj)
    return y


def gradient_check(n: int = 10, seed: int = 0, h: float = 1e-5, exaggeration: float = 1.0) -> float:
    """Max relative error between the analytic KL gradient and central differences."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 4))
    p = calibrate_affinities(x, min(3.0, n - 1)).p
    y = rng.standard_normal((n, 2))
    g = kl_gradient(p, y, exaggeration)
    num = np.zeros_like(y)
    for idx in np.ndindex(*y.shape):
        yp = y.copy()
        ym = y.copy()
        yp[idx] += h
        ym[idx] -= h
        num[idx] = (kl_objective(p, yp, exaggeration) - kl_objective(p, ym, exaggeration)) / (2 * h)
    return float(np.max(np.abs(g - num)) / max(np.max(np.abs(num)), 1e-300))
