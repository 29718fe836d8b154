"""Built-in validation suite.

Each check compares the implementation against an independent oracle or a
closed form, at the scale and tolerance listed in its docstring, and also
enforces a wall-clock budget. ``quick=True`` shrinks sample sizes (not
tolerances) so the whole suite finishes in well under two minutes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .asymptotics import (covariance_V, covariance_V_integral, loewner_gap, reduction_bound)
from .chain import (ReversibleKernel, build_mhrw, build_srw, compute_spectrum,
                    random_reversible_kernel)
from .errors import ConsistencyError
from .estimators import empirical_clt_covariance, tvd
from .graph import erdos_renyi, path_graph, random_connected_graph
from .kernel import (kernel_matrix, stationary_by_power, stationary_of, verify_nonlinear_dbe,
                     verify_scale_invariance)
from .ode import integrate, jacobian_at_mu, jacobian_fd, lyapunov_derivative
from .process import AlphaSchedule, RunConfig, run_ensemble

FAULTS = ("dbe",)
SEED = 20240917


@dataclass(frozen=True)
class CheckResult:
    code: str
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.code} {status} [{self.seconds:7.2f}s / {self.budget:g}s] {self.title}: {self.detail}"


def two_state_kernel() -> ReversibleKernel:
    """``P = [[.5, .5], [.5, .5]]``: the lazy simple walk on a single edge."""
    return build_srw(path_graph(2)).lazy(0.5)


def _break_dbe(k: ReversibleKernel, rng: np.random.Generator) -> ReversibleKernel:
    P = k.dense() * rng.uniform(0.5, 1.5, (k.n, k.n))
    P /= P.sum(axis=1, keepdims=True)
    return ReversibleKernel(P, k.mu, k.graph)


def random_cases(count: int, seed: int, inject_fault: str | None = None):
    """``(kernel, x, alpha)`` triples on random connected graphs with ``N <= 20``.

    Kernels alternate between the simple walk and Metropolis-Hastings with a
    random target; ``x`` is a Dirichlet(1) draw.
    """
    rng = np.random.default_rng(seed)
    alphas = (0.0, 0.5, 1.0, 2.0, 5.0)
    cases = []
    for c in range(count):
        n = int(rng.integers(2, 21))
        g = random_connected_graph(n, rng, extra_edge_prob=float(rng.uniform(0.05, 0.6)),
                                   weighted=bool(c % 3 == 0))
        k = build_srw(g) if c % 2 == 0 else build_mhrw(g, rng.uniform(0.2, 2.0, n))
        if inject_fault == "dbe":
            k = _break_dbe(k, rng)
        cases.append((k, rng.dirichlet(np.ones(n)), alphas[c % len(alphas)]))
    return cases


# --------------------------------------------------------------------------


def check_a1(quick=False, inject_fault=None, workers=1):
    """Nonlinear detailed balance on 200 random cases, tolerance 1e-12."""
    worst = max(verify_nonlinear_dbe(k, x, a) for k, x, a in random_cases(200, SEED, inject_fault))
    return worst <= 1e-12, f"max |pi_i K_ij - pi_j K_ji| = {worst:.2e} (tol 1e-12)"


def check_a2(quick=False, inject_fault=None, workers=1):
    """Closed-form stationary law vs power iteration, tolerance 1e-10."""
    worst = 0.0
    for k, x, a in random_cases(200, SEED, inject_fault):
        pi = stationary_of(k, x, a)
        worst = max(worst, float(np.max(np.abs(pi - stationary_by_power(kernel_matrix(k, x, a))))))
    return worst <= 1e-10, f"max deviation {worst:.2e} (tol 1e-10)"


def check_a3(quick=False, inject_fault=None, workers=1):
    """Mean-field convergence from random starts; Lyapunov monotonicity; dual dw/dt."""
    rng = np.random.default_rng(SEED + 3)
    n_graphs, n_starts = (5, 20) if quick else (20, 100)
    worst_tvd = worst_w = worst_dual = 0.0
    for gi in range(n_graphs):
        g = random_connected_graph(int(rng.integers(3, 21)), rng, extra_edge_prob=float(rng.uniform(0.1, 0.5)))
        k = build_srw(g) if gi % 2 == 0 else build_mhrw(g, rng.uniform(0.2, 2.0, g.n))
        starts = rng.dirichlet(np.ones(g.n), n_starts)
        for a in (0.5, 1.0, 2.0, -0.25):
            tr = integrate(k, starts, a, T=200.0, dt=0.01, stop_tol=1e-13)
            worst_tvd = max(worst_tvd, max(tvd(f, k.mu) for f in tr.final))
            worst_w = max(worst_w, tr.max_lyapunov_step)
            for x in starts:
                try:
                    lyapunov_derivative(k, x, a, tol=1e-9)
                except ConsistencyError as exc:
                    worst_dual = math.inf
                    print(exc)
    ok = worst_tvd < 1e-8 and worst_w <= 1e-10 and worst_dual == 0.0
    return ok, (f"{n_graphs}x{n_starts} starts: max TVD(x(200), mu) {worst_tvd:.2e}; "
                f"worst Lyapunov step {worst_w:.1e}; dual dw/dt {'agree' if worst_dual == 0 else 'MISMATCH'}")


def check_a4(quick=False, inject_fault=None, workers=1):
    """Drift Jacobian at mu: closed form vs differences and vs a generic eigensolver."""
    rng = np.random.default_rng(SEED + 4)
    fd = eig = 0.0
    exact_identity = True
    for _ in range(10):
        g = random_connected_graph(5, rng, extra_edge_prob=0.5)
        k = build_mhrw(g, rng.uniform(0.5, 2.0, 5))
        s = compute_spectrum(k)
        for a in (0.0, 0.5, 1.0, 2.0):
            jac = jacobian_at_mu(k, a, s)
            fd = max(fd, float(np.max(np.abs(jacobian_fd(k, a) - jac.matrix))))
            ev = np.sort(np.linalg.eigvals(jac.matrix).real)
            eig = max(eig, float(np.max(np.abs(ev - np.sort(jac.zeta)))))
            if a == 0.0:
                exact_identity &= bool(np.array_equal(jac.matrix, -np.eye(k.n)))
    ok = fd <= 1e-6 and eig <= 1e-8 and exact_identity
    return ok, f"FD {fd:.1e} (tol 1e-6); eigen {eig:.1e} (tol 1e-8); J(0) == -I: {exact_identity}"


def check_a5(quick=False, inject_fault=None, workers=1):
    """Empirical CLT covariance vs V(alpha); integral form vs closed form."""
    n, K = (10**4, 400) if quick else (10**5, 2000)
    tol_rel = 0.1
    rng = np.random.default_rng(SEED + 5)
    g5 = random_connected_graph(5, rng, extra_edge_prob=0.5)
    chains = {"2-state": two_state_kernel(), "mhrw-5": build_mhrw(g5)}
    parts, ok = [], True
    for name, k in chains.items():
        s = compute_spectrum(k)
        for a in (0.0, 1.0):
            V = covariance_V(s, a).matrix
            integ = float(np.max(np.abs(covariance_V_integral(k, a) - V)))
            cfg = RunConfig(k, AlphaSchedule.constant(a), n_max=n, checkpoints=[])
            ens = run_ensemble(cfg, K, SEED + 50, workers=workers)
            emp = empirical_clt_covariance(ens.final_x, n, k.mu)
            rel = float(np.max(np.abs(emp.matrix - V)) / np.max(np.abs(V)))
            ok &= rel <= tol_rel and integ <= 1e-6
            parts.append(f"{name} a={a:g}: {rel:.3f} (integral {integ:.0e})")
    return ok, f"n={n}, K={K}, rel. max-entry error (tol {tol_rel}) " + "; ".join(parts)


def check_a6(quick=False, inject_fault=None, workers=1):
    """Loewner ordering of V along an increasing alpha grid on 50 random chains."""
    rng = np.random.default_rng(SEED + 6)
    grid = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)
    worst = math.inf
    for _ in range(50):
        s = compute_spectrum(random_reversible_kernel(int(rng.integers(2, 11)), rng))
        covs = [covariance_V(s, a) for a in grid]
        for lo, hi in zip(covs, covs[1:]):
            worst = min(worst, loewner_gap(hi, lo))
    return worst > 0, f"smallest zero-sum-subspace gap {worst:.3e} (must be > 0)"


def check_a7(quick=False, inject_fault=None, workers=1):
    """Variance-ratio bound on 1000 random triples; equality on the 2-state chain."""
    rng = np.random.default_rng(SEED + 7)
    worst = -math.inf
    for _ in range(1000):
        k = random_reversible_kernel(int(rng.integers(2, 11)), rng)
        r = reduction_bound(rng.normal(size=k.n), compute_spectrum(k), float(rng.uniform(0, 10)))
        worst = max(worst, r.ratio - r.bound)
    s2 = compute_spectrum(two_state_kernel())
    exact = all(
        reduction_bound([0.0, 1.0], s2, a).bound == 1 / (2 * a + 1)
        and reduction_bound([0.0, 1.0], s2, a).ratio == 1 / (2 * a + 1)
        for a in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)
    )
    return worst <= 1e-12 and exact, f"max(ratio - bound) {worst:.2e} (tol 1e-12); 2-state exact: {exact}"


def check_a8(quick=False, inject_fault=None, workers=1):
    """Scale invariance of K on the A1 cases for c in {0.5, 2, 10}, tolerance 1e-14."""
    worst = max(verify_scale_invariance(k, x, a, c)
                for k, x, a in random_cases(200, SEED) for c in (0.5, 2.0, 10.0))
    return worst <= 1e-14, f"max |K[cx] - K[x]| = {worst:.2e} (tol 1e-14)"


def _paired_gap(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    d = a - b
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))


def check_a9(quick=False, inject_fault=None, workers=1):
    """MSE and TVD ordering across alpha on a 100-node ER graph."""
    n, K = (2 * 10**4, 60) if quick else (10**5, 200)
    g = erdos_renyi(100, 440, SEED)
    k = build_mhrw(g)
    deg = np.array(g.degrees, dtype=float)
    truth = float(deg @ k.mu)
    sq, tv = {}, {}
    for a in (0.0, 0.5, 2.0):
        cfg = RunConfig(k, AlphaSchedule.constant(a), n_max=n, checkpoints=[])
        ens, runs = run_ensemble(cfg, K, SEED + 90, workers=workers, keep_runs=True)
        sq[a] = np.array([(r.psi[-1] - truth) ** 2 for r in runs])
        tv[a] = np.array([r.tvd[-1] for r in runs])
    ok = True
    parts = []
    for name, d in (("MSE", sq), ("TVD", tv)):
        for hi, lo in ((0.0, 0.5), (0.5, 2.0)):
            gap, se = _paired_gap(d[hi], d[lo])
            ok &= gap > 2 * se
            parts.append(f"{name}({hi:g})-{name}({lo:g}) = {gap:.3g} ({gap / se if se else math.inf:.1f} SE)")
    means = ", ".join(f"a={a:g}: MSE {sq[a].mean():.3g} TVD {tv[a].mean():.3g}" for a in sq)
    return ok, f"N={g.n}, n={n}, K={K}; {means}; " + "; ".join(parts)


def check_a10(quick=False, inject_fault=None, workers=1):
    """Truncation frequency and recovery; reweighted estimator accuracy."""
    parts, ok = [], True

    g20 = erdos_renyi(20, 50, SEED + 10)
    k20 = build_mhrw(g20)
    runs_m = 100 if quick else 500
    cfg = RunConfig(k20, AlphaSchedule.constant(1.0), n_max=10**4, checkpoints=[], truncation=10.0 * g20.n)
    ens = run_ensemble(cfg, runs_m, SEED + 100, workers=workers)
    frac = float(np.mean(ens.truncations == 0))
    ok &= frac >= 0.99
    parts.append(f"M=10N on N={g20.n}: {frac:.1%} of {runs_m} runs truncation-free")

    k2 = two_state_kernel()
    cfg = RunConfig(k2, AlphaSchedule.constant(1.0), n_max=10**5, checkpoints=[10**3], truncation=2.0)
    ens, runs = run_ensemble(cfg, 100, SEED + 101, workers=workers, keep_runs=True)
    counts = ens.truncations
    i3 = int(np.searchsorted(ens.checkpoints, 10**3))
    decreased = ens.mean_tvd[-1] < ens.mean_tvd[i3]
    ok &= bool(counts.min() > 0) and decreased
    parts.append(f"M=2 on 2-state: truncations per run {counts.min()}..{counts.max()}, "
                 f"mean TVD {ens.mean_tvd[i3]:.2e} at 1e3 -> {ens.mean_tvd[-1]:.2e} at 1e5")

    n_hat = 10**5 if quick else 10**6
    g50 = erdos_renyi(50, 150, SEED + 11)
    k50 = build_srw(g50)
    target = float(np.mean(g50.degrees))
    cfg = RunConfig(k50, AlphaSchedule.constant(1.0), n_max=n_hat, checkpoints=[])
    ens = run_ensemble(cfg, 5, SEED + 102, workers=workers)
    rel = float(np.max(np.abs(ens.final_psi_hat - target)) / target)
    ok &= rel <= 0.01
    parts.append(f"reweighted mean degree on N={g50.n}, n={n_hat}: worst rel. error {rel:.2e} over 5 runs (tol 1e-2)")
    return ok, "; ".join(parts)


CHECKS: dict[str, tuple[str, float, Callable]] = {
    "A1": ("nonlinear detailed balance", 5, check_a1),
    "A2": ("power-iteration oracle", 10, check_a2),
    "A3": ("ODE global convergence", 120, check_a3),
    "A4": ("Jacobian at mu", 10, check_a4),
    "A5": ("CLT covariance", 300, check_a5),
    "A6": ("Loewner ordering", 30, check_a6),
    "A7": ("reduction bound", 30, check_a7),
    "A8": ("scale invariance", 5, check_a8),
    "A9": ("simulation ordering", 600, check_a9),
    "A10": ("truncation and reweighting", 600, check_a10),
}


def run_check(code: str, quick: bool = False, inject_fault: str | None = None, workers: int | None = 1) -> CheckResult:
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}")
    title, budget, fn = CHECKS[code]
    t0 = time.perf_counter()
    passed, detail = fn(quick=quick, inject_fault=inject_fault, workers=workers)
    seconds = time.perf_counter() - t0
    if seconds > budget:
        passed = False
        detail += f"; over the {budget:g}s budget"
    return CheckResult(code, title, bool(passed), detail, seconds, budget)


def run_validation(quick: bool = False, codes=None, inject_fault: str | None = None, workers: int | None = 1,
                   emit: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    for code in codes or CHECKS:
        res = run_check(code, quick, inject_fault, workers)
        if emit is not None:
            emit(res.line())
        results.append(res)
    return results
