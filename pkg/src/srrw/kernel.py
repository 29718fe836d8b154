"""The self-repellent transition kernel ``K[x]`` and its stationary law.

Repellence is polynomial: ``r(x_j) = (x_j / mu_j)^(-alpha)``. Every function
here accepts raw positive vectors as well as points of the simplex; the
kernel is invariant to rescaling ``x`` so normalisation is never required.
Powers are evaluated in log space with a max shift, which keeps the result
finite near the simplex boundary and exactly scale invariant up to rounding.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .chain import ReversibleKernel
from .errors import DomainError

ALPHA_FLOOR = -0.5


def check_alpha(alpha: float) -> float:
    """Validate a repellence strength; ``alpha > -0.5`` and finite."""
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= ALPHA_FLOOR:
        raise ValueError(f"alpha must be finite and > {ALPHA_FLOOR}, got {alpha}")
    return alpha


def in_stated_theory(alpha: float) -> bool:
    """Second-order results (CLT, covariance ordering) are claimed for alpha >= 0 only."""
    return alpha >= 0


def _log_repellence(x, mu, alpha) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -alpha * (np.log(x) - np.log(mu))


def _check_interior(x, support=None):
    x = np.asarray(x, dtype=float)
    bad = ~(x > 0) if support is None else support & ~(x > 0)
    if np.any(bad):
        raise DomainError(f"measure must be positive on the kernel support; bad nodes {np.flatnonzero(bad)[:5]}")
    return x


def kernel_row(k: ReversibleKernel, x, i: int, alpha: float) -> np.ndarray:
    """Row ``i`` of ``K[x]``: ``P_ij r(x_j) / sum_k P_ik r(x_k)``."""
    p = k.csr
    cols = p.indices[p.indptr[i]:p.indptr[i + 1]]
    vals = p.data[p.indptr[i]:p.indptr[i + 1]]
    x = np.asarray(x, dtype=float)
    if np.any(~(x[cols] > 0)):
        raise DomainError(f"measure vanishes on a neighbour of node {i}")
    row = np.zeros(k.n)
    if alpha == 0:
        row[cols] = vals
        return row
    logw = np.log(vals) + _log_repellence(x[cols], k.mu[cols], alpha)
    w = np.exp(logw - logw.max())
    row[cols] = w / w.sum()
    return row


def kernel_matrix(k: ReversibleKernel, x, alpha: float) -> np.ndarray:
    """Dense ``K[x]``; meant for analysis and oracles on small graphs."""
    x = _check_interior(x)
    P = k.dense()
    if alpha == 0:
        return P.copy()
    with np.errstate(divide="ignore"):
        logw = np.log(P) + _log_repellence(x, k.mu, alpha)[None, :]
    # shift each row by its own maximum so no row underflows entirely
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


def stationary_of(k: ReversibleKernel, x, alpha: float) -> np.ndarray:
    """Closed-form stationary law of ``K[x]``.

    ``pi_i(x) ∝ sum_j mu_i P_ij r(x_i) r(x_j)``. Accepts a batch of measures
    with shape ``(B, N)``.
    """
    x = _check_interior(x)
    logr = _log_repellence(x, k.mu, alpha)
    P = k.dense()
    r = np.exp(logr - logr.max(axis=-1, keepdims=True))
    f = k.mu * r * (r @ P.T)
    total = f.sum(axis=-1, keepdims=True)
    bad = ~(total > 0) | ~np.isfinite(total)
    if np.any(bad):
        # extreme measures underflow every term; redo those rows fully in log space
        with np.errstate(divide="ignore"):
            logP = np.log(P)
        f = np.array(f, copy=True)
        flat_f, flat_r = f.reshape(-1, k.n), logr.reshape(-1, k.n)
        for b in np.flatnonzero(bad.reshape(-1)):
            lf = np.log(k.mu) + flat_r[b] + logsumexp(logP + flat_r[b][None, :], axis=1)
            flat_f[b] = np.exp(lf - lf.max())
        total = f.sum(axis=-1, keepdims=True)
    return f / total


def sample_next(row: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over ``row`` in ascending node order.

    ``u`` is a uniform draw in ``[0, 1)``. Rounding can leave ``u`` above the
    last cumulative sum; the last node with positive mass is returned then.
    """
    cdf = np.cumsum(row)
    # first index whose cumulative sum exceeds the target; that entry has positive mass
    j = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    if j >= len(row):
        j = int(np.flatnonzero(row > 0)[-1])
    return j


def verify_scale_invariance(k: ReversibleKernel, x, alpha: float, c: float) -> float:
    """``max_ij |K_ij[c x] - K_ij[x]|`` for a positive scalar ``c``."""
    x = _check_interior(x)
    return float(np.max(np.abs(kernel_matrix(k, c * x, alpha) - kernel_matrix(k, x, alpha))))


def verify_nonlinear_dbe(k: ReversibleKernel, x, alpha: float) -> float:
    """``max_ij |pi_i(x) K_ij[x] - pi_j(x) K_ji[x]|``."""
    K = kernel_matrix(k, x, alpha)
    flow = stationary_of(k, x, alpha)[:, None] * K
    return float(np.max(np.abs(flow - flow.T)))


def stationary_by_power(K: np.ndarray, squarings: int = 64) -> np.ndarray:
    """Dominant left eigenvector of a stochastic matrix by repeated squaring.

    Works on the lazy chain ``(I + K) / 2`` so periodic kernels converge too;
    the lazy chain has the same stationary law.
    """
    M = 0.5 * (K + np.eye(len(K)))
    for _ in range(squarings):
        M2 = M @ M
        M2 /= M2.sum(axis=1, keepdims=True)
        if np.max(np.abs(M2 - M)) == 0.0:
            M = M2
            break
        M = M2
    pi = M.mean(axis=0)
    return pi / pi.sum()
