"""MCMC estimators and convergence metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

NORMALISATION_TOL = 1e-9


@dataclass
class RunningEstimator:
    """Running sums for the plain and the ``1/mu``-reweighted ergodic averages.

    Only actual visits enter; fake-visit priors are excluded.

    Parameters
    ----------
    g : ndarray
        Function values, one per node.
    mu : ndarray
        Target of the base chain. Only its reciprocal is used, so any
        positive rescaling gives the same reweighted estimate.
    """

    g: np.ndarray
    mu: np.ndarray
    n: int = 0
    sum_g: float = 0.0
    sum_wg: float = 0.0
    sum_w: float = 0.0
    _w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if mu.shape != self.g.shape:
            raise ValueError("g and mu must have the same length")
        if np.any(~(mu > 0)):
            raise DomainError("reweighting needs a strictly positive target")
        self.mu = mu
        self._w = 1.0 / mu

    def update(self, node: int) -> None:
        gi = self.g[node]
        wi = self._w[node]
        self.n += 1
        self.sum_g += gi
        self.sum_wg += wi * gi
        self.sum_w += wi

    def extend(self, nodes) -> None:
        for i in nodes:
            self.update(int(i))

    @classmethod
    def from_visits(cls, g, mu, visits) -> RunningEstimator:
        """Estimator state implied by per-node visit counts."""
        est = cls(g, mu)
        v = np.asarray(visits, dtype=float)
        est.n = int(v.sum())
        est.sum_g = float(est.g @ v)
        est.sum_wg = float((est._w * est.g) @ v)
        est.sum_w = float(est._w @ v)
        return est


def psi(est: RunningEstimator) -> float:
    """Plain ergodic average ``(1/n) sum_k g(X_k)``."""
    if est.n == 0:
        raise ValueError("estimator has no samples")
    return est.sum_g / est.n


def psi_reweighted(est: RunningEstimator) -> float:
    """Self-normalised importance-weighted average with weights ``1/mu``."""
    if est.n == 0:
        raise ValueError("estimator has no samples")
    return est.sum_wg / est.sum_w


def tvd(x, mu) -> float:
    """Total variation distance ``0.5 * ||x - mu||_1``."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if x.shape != mu.shape:
        raise ValueError("distributions must have the same length")
    for name, v in (("x", x), ("mu", mu)):
        if abs(v.sum() - 1.0) > NORMALISATION_TOL:
            raise DomainError(f"{name} sums to {v.sum():.12g}, not 1")
    return 0.5 * float(np.abs(x - mu).sum())


def mse(estimates, truth: float) -> float:
    """Mean squared error of a list of estimates about ``truth``."""
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        raise ValueError("mse of an empty list")
    return float(np.mean((e - truth) ** 2))


@dataclass(frozen=True)
class CltCovariance:
    """``n`` times the across-run sample covariance, with per-entry standard errors."""

    n: int
    runs: int
    matrix: np.ndarray
    stderr: np.ndarray


def empirical_clt_covariance(xs, n: int, mu=None) -> CltCovariance:
    """Monte Carlo estimate of the limit covariance of ``sqrt(n) (x_n - mu)``.

    Centering is at the across-run mean; ``mu`` is only used to check shapes.
    The standard error of entry ``(i, j)`` is the standard deviation of the
    per-run products divided by ``sqrt(K)``.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[0] < 2:
        raise ValueError("need at least two runs")
    if mu is not None and np.shape(mu) != xs.shape[1:]:
        raise ValueError("mu has the wrong length")
    k = xs.shape[0]
    d = xs - xs.mean(axis=0)
    prods = d[:, :, None] * d[:, None, :]
    cov = n * prods.sum(axis=0) / (k - 1)
    se = n * prods.std(axis=0, ddof=1) / math.sqrt(k)
    return CltCovariance(n, k, cov, se)
