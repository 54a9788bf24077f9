"""Exact (quadratic) t-SNE with perplexity calibration by binary search.

Standard settings: early exaggeration 12 for the first 250 of 1000 gradient
descent iterations, learning rate 200, momentum 0.5 switching to 0.8, gain
adaptation with a 0.01 floor. Deterministic given the seed.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericError

MAX_POINTS = 5000
_EPS = 1e-12


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d = sq[:, None] - 2.0 * (x @ x.T) + sq[None, :]
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _conditional_probs(dists_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Shannon entropy (nats) and conditional p_{j|i} for one point at precision beta."""
    p = np.exp(-dists_row * beta)
    s = p.sum()
    if s <= 0.0:
        return 0.0, np.zeros_like(p)
    h = np.log(s) + beta * float((dists_row * p).sum()) / s
    return h, p / s

def _search_beta(dists_row: np.ndarray, target_entropy: float, tol: float = 1e-5, max_iter: int = 50) -> np.ndarray:
    beta, beta_min, beta_max = 1.0, -np.inf, np.inf
    h, p = _conditional_probs(dists_row, beta)
    for _ in range(max_iter):
        if abs(h - target_entropy) < tol:
            break
        if h > target_entropy:
            beta_min = beta
            beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
        else:
            beta_max = beta
            beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        h, p = _conditional_probs(dists_row, beta)
    return p


def joint_probabilities(x: np.ndarray, perplexity: float) -> np.ndarray:
    n = x.shape[0]
    if not 1.0 <= perplexity < n:
        raise ConfigError(f"perplexity must be in [1, n_points), got {perplexity} for {n} points")
    dists = _pairwise_sq_dists(x)
    target = np.log(perplexity)
    cond = np.zeros((n, n))
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        cond[i, mask[i]] = _search_beta(dists[i, mask[i]], target)
    p = cond + cond.T
    p /= max(p.sum(), _EPS)
    return np.maximum(p, _EPS)


def tsne_embed(
    x: np.ndarray,
    seed: int,
    perplexity: float = 30.0,
    n_iter: int = 1000,
    exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    learning_rate: float = 200.0,
) -> np.ndarray:
    """Embed rows of x into 2-D. Exact O(n^2) variant, n capped at MAX_POINTS."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise ConfigError(f"t-SNE needs at least 3 points, got {n}")
    if n > MAX_POINTS:
        raise ConfigError(f"{n} points exceeds the exact t-SNE cap of {MAX_POINTS}; subsample the frames first")

    p = joint_probabilities(x, perplexity) * exaggeration
    rng = np.random.default_rng([seed])
    y = rng.standard_normal((n, 2)) * 1e-4
    update = np.zeros_like(y)
    gains = np.ones_like(y)

    for it in range(n_iter):
        if it == exaggeration_iters:
            p = p / exaggeration
        momentum = 0.5 if it < exaggeration_iters else 0.8

        num = 1.0 / (1.0 + _pairwise_sq_dists(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / max(num.sum(), _EPS), _EPS)

        # dC/dy_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + ||y_i - y_j||^2)
        w = (p - q) * num
        grad = 4.0 * ((np.diag(w.sum(axis=1)) - w) @ y)

        inc = (update * grad) < 0
        gains = np.where(inc, gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * (gains * grad)
        y = y + update
        y = y - y.mean(axis=0)

    if not np.all(np.isfinite(y)):
        raise NumericError("t-SNE embedding diverged to non-finite coordinates")
    return y
