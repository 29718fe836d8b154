"""Mean-field dynamics ``dx/dt = pi(x) - x`` of the self-repellent walk.

Besides the drift and a fixed-step RK4 integrator this module provides the
Lyapunov function ``w`` with two independent expressions for its time
derivative, and the Jacobian of the drift at the equilibrium ``mu`` in both
closed form and by central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ReversibleKernel, compute_spectrum
from .errors import ConsistencyError, DomainError, IntegrationError
from .kernel import check_alpha, stationary_of

MIN_DT = 1e-12
CONSISTENCY_TOL = 1e-9


def drift(k: ReversibleKernel, x, alpha: float) -> np.ndarray:
    """``h(x) = pi(x) - x``; ``x`` may be a batch of shape ``(B, N)``."""
    x = np.asarray(x, dtype=float)
    return stationary_of(k, x, alpha) - x


def _rep(k, x, alpha):
    if np.any(~(x > 0)):
        raise DomainError("measure must be strictly positive")
    return np.exp(-alpha * (np.log(x) - np.log(k.mu)))


def lyapunov(k: ReversibleKernel, x, alpha: float):
    """``w(x) = sum_ij mu_i P_ij r_i r_j`` with ``r_i = (x_i/mu_i)^-alpha``.

    ``x`` is normalised first because ``w`` is not scale invariant. Accepts a
    batch ``(B, N)`` and then returns one value per row.
    """
    x = np.asarray(x, dtype=float)
    x = x / x.sum(axis=-1, keepdims=True)
    r = _rep(k, x, alpha)
    return np.sum(k.mu * r * (r @ k.dense().T), axis=-1)


def lyapunov_derivative(k: ReversibleKernel, x, alpha: float, tol: float = CONSISTENCY_TOL) -> float:
    """``dw/dt`` along the flow at ``x``.

    The gradient form ``grad w . h`` is cross-checked against
    ``-(2 alpha / w) Var[Z]`` with ``Z_i = w pi_i / x_i`` drawn with
    probability ``x_i``. A relative mismatch above ``tol`` raises
    ConsistencyError.
    """
    x = np.asarray(x, dtype=float)
    x = x / x.sum()
    mu = k.mu
    r = _rep(k, x, alpha)
    pr = k.dense() @ r
    w = float(mu @ (r * pr))
    grad = -2.0 * alpha * mu * r * pr / x
    h = drift(k, x, alpha)
    via_grad = float(grad @ h)

    z = w * stationary_of(k, x, alpha) / x
    mean = x @ z
    var = float(x @ (z - mean) ** 2)
    via_var = -2.0 * alpha * var / w

    scale = max(abs(via_grad), abs(via_var))
    if scale > 0 and abs(via_grad - via_var) > tol * scale and abs(via_grad - via_var) > 1e-15:
        raise ConsistencyError(f"dw/dt mismatch: gradient form {via_grad:.17g}, variance form {via_var:.17g}")
    return via_grad


@dataclass(frozen=True)
class OdeTrajectory:
    """Recorded solution of the mean-field ODE.

    ``states`` has shape ``(T, N)`` for a single start or ``(T, B, N)`` for a
    batch; ``lyapunov`` matches without the last axis. ``max_lyapunov_step``
    is the largest per-step relative move of ``w`` against the direction in
    which it must be monotone (nonincreasing for ``alpha >= 0``,
    nondecreasing for ``alpha < 0``) over every internal step, recorded or
    not. ``final`` is the state at ``t_end``. When the drift falls below
    ``stop_tol`` integration ends early and ``t_end < T``.
    """

    times: np.ndarray
    states: np.ndarray
    lyapunov: np.ndarray
    final: np.ndarray
    t_end: float
    steps: int
    halvings: int
    max_lyapunov_step: float
    min_entry: float

    def write_csv(self, path, column: int = 0) -> None:
        """Columns ``t, x_0..x_{N-1}, w``; for batches pick one start via ``column``."""
        states = self.states if self.states.ndim == 2 else self.states[:, column]
        w = self.lyapunov if self.lyapunov.ndim == 1 else self.lyapunov[:, column]
        n = states.shape[1]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["t"] + [f"x_{i}" for i in range(n)] + ["w"]) + "\n")
            for t, x, wv in zip(self.times, states, w):
                fh.write(",".join(repr(float(v)) for v in (t, *x, wv)) + "\n")


def _batch_drift(P, mu, logmu, x, alpha):
    if alpha == 0.0:
        return mu - x
    logr = -alpha * (np.log(x) - logmu)
    r = np.exp(logr - logr.max(axis=1, keepdims=True))
    f = mu * r * (r @ P.T)
    return f / f.sum(axis=1, keepdims=True) - x


def _rk4(P, mu, logmu, x, alpha, dt, k1=None):
    if k1 is None:
        k1 = _batch_drift(P, mu, logmu, x, alpha)
    y = x + 0.5 * dt * k1
    if np.any(y <= 0):
        return None
    k2 = _batch_drift(P, mu, logmu, y, alpha)
    y = x + 0.5 * dt * k2
    if np.any(y <= 0):
        return None
    k3 = _batch_drift(P, mu, logmu, y, alpha)
    y = x + dt * k3
    if np.any(y <= 0):
        return None
    k4 = _batch_drift(P, mu, logmu, y, alpha)
    out = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if np.any(out <= 0):
        return None
    return out


def integrate(k: ReversibleKernel, x0, alpha: float, T: float = 200.0, dt: float = 0.01,
              stride: int | None = None, stop_tol: float | None = None) -> OdeTrajectory:
    """Classical RK4 with a positivity guard.

    A step whose stages leave the open simplex is replaced by two half steps,
    recursively; going below ``1e-12`` raises IntegrationError. States are
    renormalised after each step to remove round-off drift off the simplex.

    Parameters
    ----------
    x0 : array_like, shape (N,) or (B, N)
        Interior starting point(s).
    stride : int, optional
        Record every ``stride``-th step. Defaults to at most ~2000 records.
    stop_tol : float, optional
        Stop once ``max |h|`` over all starts is below this value.
    """
    alpha = check_alpha(alpha)
    if not (dt > 0 and T >= 0):
        raise ValueError("need dt > 0 and T >= 0")
    x = np.array(x0, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != k.n:
        raise ValueError("starting point has the wrong length")
    if np.any(~(x > 0)):
        raise DomainError("starting point must be interior")
    x = x / x.sum(axis=1, keepdims=True)
    P = k.dense()
    mu = k.mu
    logmu = np.log(mu)
    n_steps = int(math.ceil(T / dt - 1e-9))
    if stride is None:
        stride = max(1, n_steps // 2000)
    sign = 1.0 if alpha >= 0 else -1.0

    times, states, ws = [0.0], [x.copy()], [lyapunov(k, x, alpha)]
    w_prev = ws[0]
    worst = -math.inf
    min_entry = float(x.min())
    halvings = 0
    t = 0.0

    def advance(y, h, k1=None):
        nonlocal halvings
        out = _rk4(P, mu, logmu, y, alpha, h, k1)
        if out is not None:
            return out
        if h / 2 < MIN_DT:
            raise IntegrationError(f"step size fell below {MIN_DT:g} at t={t:.6g}")
        halvings += 1
        return advance(advance(y, h / 2, k1), h / 2)

    steps = 0
    hx = _batch_drift(P, mu, logmu, x, alpha)
    for s in range(1, n_steps + 1):
        h = min(dt, T - t)
        if h <= 0:
            break
        x = advance(x, h, hx)
        x /= x.sum(axis=1, keepdims=True)
        hx = _batch_drift(P, mu, logmu, x, alpha)
        t = s * dt if s < n_steps else T
        steps = s
        w = lyapunov(k, x, alpha)
        worst = max(worst, float(np.max(sign * (w - w_prev) / w_prev)))
        w_prev = w
        min_entry = min(min_entry, float(x.min()))
        done = stop_tol is not None and np.max(np.abs(hx)) < stop_tol
        if s % stride == 0 or s == n_steps or done:
            times.append(t)
            states.append(x.copy())
            ws.append(w)
        if done:
            break

    states = np.array(states)
    ws = np.array(ws)
    if single:
        states, ws = states[:, 0], ws[:, 0]
    return OdeTrajectory(
        times=np.array(times),
        states=states,
        lyapunov=ws,
        final=states[-1],
        t_end=t,
        steps=steps,
        halvings=halvings,
        max_lyapunov_step=worst if steps else 0.0,
        min_entry=min_entry,
    )


@dataclass(frozen=True)
class JacobianAtMu:
    """Closed-form drift Jacobian at ``mu`` with its eigen-structure.

    ``zeta`` is aligned with the base spectrum: entry ``i < N-1`` belongs to
    ``lambda_i`` with right eigenvector ``u_i`` and left eigenvector ``v_i``;
    the last entry is ``-1`` with right eigenvector ``mu``.
    """

    alpha: float
    matrix: np.ndarray
    zeta: np.ndarray
    right: np.ndarray
    left: np.ndarray


def jacobian_at_mu(k: ReversibleKernel, alpha: float, spectrum=None) -> JacobianAtMu:
    """``J = 2 alpha mu 1^T - alpha P^T - (alpha + 1) I``."""
    alpha = check_alpha(alpha)
    s = spectrum if spectrum is not None else compute_spectrum(k)
    n = k.n
    J = 2 * alpha * np.outer(k.mu, np.ones(n)) - alpha * k.dense().T - (alpha + 1) * np.eye(n)
    zeta = -alpha * (1.0 + s.eigenvalues) - 1.0
    zeta[-1] = -1.0
    return JacobianAtMu(alpha, J, zeta, s.left, s.right)


def jacobian_fd(k: ReversibleKernel, alpha: float, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of the drift at ``mu``.

    Coordinates are perturbed one at a time without renormalising; the
    stationary law is scale invariant so raw vectors are valid inputs. The
    step for coordinate ``j`` is ``min(step, mu_j / 10)``.
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError("finite-difference step must lie in [1e-7, 1e-3]")
    alpha = check_alpha(alpha)
    n = k.n
    mu = k.mu
    hs = np.minimum(step, mu / 10.0)
    plus = np.tile(mu, (n, 1))
    minus = plus.copy()
    plus[np.arange(n), np.arange(n)] += hs
    minus[np.arange(n), np.arange(n)] -= hs
    f = lambda z: stationary_of(k, z, alpha) - z  # noqa: E731  (raw vectors, no renormalisation)
    return ((f(plus) - f(minus)) / (2 * hs[:, None])).T
