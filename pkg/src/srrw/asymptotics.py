"""Second-order theory: asymptotic covariances of the empirical measure.

``U`` is the covariance of the base chain's occupation measure and ``V(alpha)``
its self-repellent counterpart. Both live on the zero-sum subspace (they
annihilate the all-ones vector), which is where orderings are compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, null_space

from .chain import ReversibleKernel, Spectrum
from .errors import DomainError, HorizonError, NonErgodicError
from .kernel import check_alpha, in_stated_theory

ERGODIC_TOL = 1e-10
MINUS_ONE_TOL = 1e-12


def _one_plus(lam: np.ndarray) -> np.ndarray:
    # eigenvalues that round to just below -1 clamp to the exact boundary
    return np.where(lam < -1 + MINUS_ONE_TOL, np.maximum(1.0 + lam, 0.0), 1.0 + lam)


def _base_weights(s: Spectrum) -> np.ndarray:
    lam = s.eigenvalues[:-1]
    if s.n > 1 and lam[-1] >= 1 - ERGODIC_TOL:
        raise NonErgodicError(f"second eigenvalue {lam[-1]:.12g} is within {ERGODIC_TOL:g} of 1")
    return _one_plus(lam) / (1.0 - lam)


def covariance_U(s: Spectrum) -> np.ndarray:
    """``U = sum_{k<N} (1+lambda_k)/(1-lambda_k) u_k u_k^T``."""
    u = s.left[:, :-1]
    return (u * _base_weights(s)) @ u.T


def covariance_U_fundamental(k: ReversibleKernel) -> np.ndarray:
    """``U`` from the fundamental matrix, without any eigendecomposition.

    With ``F = I - 1 mu^T`` and ``Z = (I - P + 1 mu^T)^-1`` the asymptotic
    covariance of ``sqrt(n) (x_n - mu)`` is
    ``2 F^T D Z F - F^T D F - F^T mu mu^T F``.
    """
    P = k.dense()
    mu = k.mu
    n = k.n
    one_mu = np.outer(np.ones(n), mu)
    Z = np.linalg.inv(np.eye(n) - P + one_mu)
    F = np.eye(n) - one_mu
    D = np.diag(mu)
    m = np.outer(mu, mu)
    # F^T mu = 0, so the last term vanishes; kept for fidelity to the identity
    U = 2 * F.T @ D @ Z @ F - F.T @ D @ F - F.T @ m @ F
    return 0.5 * (U + U.T)


def coefficients(lam, alpha: float) -> np.ndarray:
    """``c_i(alpha) = (1+lambda_i)/(1-lambda_i) / (2 alpha (1+lambda_i) + 1)``."""
    lam = np.asarray(lam, dtype=float)
    op = _one_plus(lam)
    return op / (1.0 - lam) / (2.0 * alpha * op + 1.0)


@dataclass(frozen=True)
class AsymptoticCovariance:
    """``V(alpha) = sum_i c_i u_i u_i^T`` over the non-unit eigendirections.

    ``in_theory`` is False for negative ``alpha``, where the closed form is
    evaluated but no limit theorem backs it.
    """

    alpha: float
    coefficients: np.ndarray
    directions: np.ndarray
    matrix: np.ndarray
    in_theory: bool


def covariance_V(s: Spectrum, alpha: float) -> AsymptoticCovariance:
    alpha = check_alpha(alpha)
    _base_weights(s)
    lam = s.eigenvalues[:-1]
    denom = 2.0 * alpha * _one_plus(lam) + 1.0
    if np.any(denom <= 0):
        raise DomainError(f"alpha={alpha} makes 2 alpha (1+lambda) + 1 nonpositive")
    c = coefficients(lam, alpha)
    u = s.left[:, :-1]
    V = (u * c) @ u.T
    return AsymptoticCovariance(alpha, c, u, V, in_stated_theory(alpha))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _as_kernel(source) -> ReversibleKernel:
    if isinstance(source, ReversibleKernel):
        return source
    if isinstance(source, Spectrum):
        return ReversibleKernel(source.reconstruct(), source.mu)
    raise TypeError("expected a ReversibleKernel or a Spectrum")


def covariance_V_integral(source, alpha: float, step: float = 0.5, horizon: float | None = None,
                          tol: float = 1e-12) -> np.ndarray:
    """``V = int_0^inf exp(tA) U exp(tA)^T dt`` with ``A = J(alpha) + I/2``.

    Independent of the spectral closed form: ``U`` comes from the fundamental
    matrix and the exponentials from ``expm``. The integral is split into
    panels of width ``step`` with 8-point Gauss-Legendre per panel; panel
    starts are propagated with ``exp(step A)``. The tail beyond ``horizon``
    is bounded by ``kappa^2 ||U|| exp(-2 rho T) / (2 rho)``, where ``rho`` is a
    decay rate on the zero-sum subspace and ``kappa^2 = max mu / min mu``
    converts the ``1/mu``-weighted norm to the Euclidean one. If that bound
    exceeds ``tol`` a HorizonError carries the horizon that would suffice.
    ``horizon=None`` picks that horizon automatically.
    """
    alpha = check_alpha(alpha)
    k = _as_kernel(source)
    if alpha < 0 and 1 + 4 * alpha <= 0:
        raise DomainError("integral diverges for this alpha")
    n = k.n
    U = covariance_U_fundamental(k)
    A = 2 * alpha * np.outer(k.mu, np.ones(n)) - alpha * k.dense().T - (alpha + 0.5) * np.eye(n)
    rho = 0.5 if alpha >= 0 else 0.5 + 2 * alpha
    kappa2 = float(k.mu.max() / k.mu.min())
    scale = kappa2 * max(float(np.linalg.norm(U, 2)), np.finfo(float).tiny)
    needed = float(math.ceil(max(0.0, math.log(scale / (2 * rho * tol)) / (2 * rho)))) + 1.0
    if horizon is None:
        horizon = needed
    tail = scale * math.exp(-2 * rho * horizon) / (2 * rho)
    if tail > tol:
        raise HorizonError(f"tail bound {tail:.3e} exceeds {tol:.1e} at horizon {horizon:g}",
                           suggested_horizon=needed)
    # the fastest mode decays at rate 2 (alpha (1 + lambda_max) + 1/2) <= 4 alpha + 1
    h = min(step, 4.0 / (4 * abs(alpha) + 1))
    panels = max(1, int(math.ceil(horizon / h)))
    h = horizon / panels
    offsets = 0.5 * h * (_GL_NODES + 1)
    E_nodes = [expm(t * A) for t in offsets]
    E_step = expm(h * A)
    V = np.zeros((n, n))
    E0 = np.eye(n)
    for _ in range(panels):
        for E, wgt in zip(E_nodes, _GL_WEIGHTS):
            M = E @ E0
            V += (0.5 * h * wgt) * (M @ U @ M.T)
        E0 = E_step @ E0
    return 0.5 * (V + V.T)


def zero_sum_basis(n: int) -> np.ndarray:
    """Orthonormal basis (``n x (n-1)``) of ``{x : sum x = 0}``."""
    return null_space(np.ones((1, n)))


def loewner_gap(V_a, V_b) -> float:
    """Smallest eigenvalue of ``V_b - V_a`` on the zero-sum subspace.

    Positive means ``V_a`` lies strictly below ``V_b`` there.
    """
    V_a = getattr(V_a, "matrix", V_a)
    V_b = getattr(V_b, "matrix", V_b)
    Q = zero_sum_basis(len(V_a))
    D = Q.T @ (V_b - V_a) @ Q
    return float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])


def sampling_variance(g, V) -> float:
    """``g^T V g``; exact spectral sum when given an AsymptoticCovariance."""
    g = np.asarray(g, dtype=float)
    if isinstance(V, AsymptoticCovariance):
        proj = g @ V.directions
        return float(V.coefficients @ proj**2)
    V = np.asarray(V, dtype=float)
    return float(g @ V @ g)


@dataclass(frozen=True)
class ReductionBound:
    """Upper bound on the variance ratio and the exact ratio itself."""

    alpha: float
    bound: float
    ratio: float


def reduction_bound(g, s: Spectrum, alpha: float) -> ReductionBound:
    """``E[1 / (2 alpha (1 + Lambda) + 1)]`` with ``P(Lambda = lambda_i) ∝ (g^T u_i)^2``.

    The exact ratio ``g^T V(alpha) g / g^T V(0) g`` is returned alongside.
    """
    alpha = check_alpha(alpha)
    g = np.asarray(g, dtype=float)
    base = _base_weights(s)
    lam = s.eigenvalues[:-1]
    proj2 = (g @ s.left[:, :-1]) ** 2
    total = proj2.sum()
    if not total > 1e-24 * (total + float(g @ s.mu) ** 2):
        raise DomainError("g is constant, so every direction has zero weight")
    f = 1.0 / (2.0 * alpha * _one_plus(lam) + 1.0)
    p = proj2 / total
    q = proj2 * base
    q = q / q.sum()
    return ReductionBound(alpha, float(p @ f), float(q @ f))


ANALYSIS_COLUMNS = ("alpha", "g_id", "variance", "bound", "ratio", "loewner_gap")


def analysis_table(s: Spectrum, alphas, functions: dict) -> list[tuple]:
    """Rows ``(alpha, g_id, variance, bound, ratio, loewner_gap)``.

    ``loewner_gap`` compares ``V(alpha)`` against the previous grid entry and
    is NaN on the first row of each function.
    """
    alphas = [check_alpha(a) for a in alphas]
    covs = [covariance_V(s, a) for a in alphas]
    rows = []
    for gid, g in functions.items():
        for i, (a, V) in enumerate(zip(alphas, covs)):
            rb = reduction_bound(g, s, a)
            gap = loewner_gap(V, covs[i - 1]) if i else math.nan
            rows.append((a, gid, sampling_variance(g, V), rb.bound, rb.ratio, gap))
    return rows
