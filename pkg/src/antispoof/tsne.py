"""Exact stochastic-neighbor 2-D projection for embedding inspection.

Straightforward dense implementation: per-point bandwidths are binary-searched
to a target perplexity, the symmetrized affinities are matched against a
student-t low-dimensional kernel by gradient descent with momentum, adaptive
per-coordinate gains and early exaggeration. Dense O(n^2) memory, intended for
at most a few thousand points; fully deterministic given the seed.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def _conditional_probs(dists2: np.ndarray, perplexity: float,
                       tol: float = 1e-5, max_iter: int = 50) -> np.ndarray:
    n = dists2.shape[0]
    target_entropy = np.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        row = np.delete(dists2[i], i)
        for _ in range(max_iter):
            weights = np.exp(-row * beta)
            total = weights.sum()
            if total <= 0:
                entropy, probs = 0.0, weights
            else:
                probs = weights / total
                entropy = np.log(total) + beta * float((row * weights).sum()) / total
            diff = entropy - target_entropy
            if abs(diff) < tol:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2 if beta_max == np.inf else (beta + beta_max) / 2
            else:
                beta_max = beta
                beta = beta / 2 if beta_min == -np.inf else (beta + beta_min) / 2
        p[i, np.arange(n) != i] = probs
    return p


def project_2d(embeddings: np.ndarray, perplexity: float = 30.0,
               iterations: int = 500, seed: int = 0,
               learning_rate: float = 200.0) -> np.ndarray:
    """Project (N, E) embeddings to (N, 2)."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 4:
        raise DataError("projection needs a 2-d array with at least 4 rows")
    n = x.shape[0]
    perplexity = min(perplexity, (n - 1) / 3.0)

    sq_norms = (x * x).sum(axis=1)
    dists2 = np.maximum(sq_norms[:, None] + sq_norms[None, :] - 2.0 * x @ x.T, 0.0)
    p_cond = _conditional_probs(dists2, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    rng = np.random.default_rng(seed)
    y = rng.normal(scale=1e-4, size=(n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exaggeration_until = min(100, iterations // 4)

    for it in range(iterations):
        p_eff = p * 4.0 if it < exaggeration_until else p
        yn = (y * y).sum(axis=1)
        num = 1.0 / (1.0 + yn[:, None] + yn[None, :] - 2.0 * y @ y.T)
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)
        pq = (p_eff - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)

        momentum = 0.5 if it < 250 else 0.8
        gains = np.where(np.sign(grad) != np.sign(update), gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
    return y
