"""The self-repellent walk as a stochastic-approximation process.

The empirical measure is stored as positive counts plus their total, so an
update is one increment instead of a renormalisation of the whole vector.
With an initial total ``t0`` the count update equals the affine recursion
``x <- x + (delta_X - x) / (t0 + n + 1)``; ``t0 = 1`` is the textbook
``1 / (n + 2)`` step.

Two execution paths exist. :func:`step` and :func:`step_truncated` are the
plain-Python reference semantics and operate on a :class:`RunState`.
:func:`run` drives the compiled loop in :mod:`srrw._walk` and is what the
ensemble harness uses; the test-suite checks the two agree path by path.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _walk
from .chain import ReversibleKernel
from .errors import ConfigError
from .estimators import mse, tvd
from .graph import Graph
from .kernel import check_alpha, kernel_row, sample_next

CHUNK = 1 << 16


# ---------------------------------------------------------------------------
# empirical measure


@dataclass
class EmpiricalMeasure:
    """Fake-visit prior plus visit tallies. ``x = counts / total``."""

    counts: np.ndarray
    total: float

    @property
    def x(self) -> np.ndarray:
        return self.counts / self.total

    def copy(self) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.counts.copy(), self.total)


def init_measure(g: Graph | int, mode="uniform") -> EmpiricalMeasure:
    """Initial measure from fake visits.

    ``"uniform"`` puts one fake visit on every node, ``"degree"`` puts
    ``deg(i)`` on node ``i`` (so ``x0`` is the degree distribution), and an
    array ``nu`` is used as-is with total 1.
    """
    if isinstance(mode, str):
        if mode == "uniform":
            n = g if isinstance(g, int) else g.n
            return EmpiricalMeasure(np.ones(n), float(n))
        if mode == "degree":
            if not isinstance(g, Graph):
                raise ConfigError("degree-weighted fake visits need a graph")
            d = np.array(g.degrees, dtype=float)
            return EmpiricalMeasure(d, float(d.sum()))
        raise ConfigError(f"unknown init mode {mode!r}")
    nu = np.asarray(mode, dtype=float)
    n = g if isinstance(g, int) else g.n
    if nu.shape != (n,):
        raise ConfigError(f"explicit initial measure must have length {n}")
    if np.any(~(nu > 0)):
        raise ConfigError("explicit initial measure must be strictly positive")
    return EmpiricalMeasure(nu / nu.sum(), 1.0)


# ---------------------------------------------------------------------------
# alpha schedules

def _checked(alpha):
    try:
        return check_alpha(alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_SCHEDULE_RE = re.compile(r"^\s*([a-z0-9_]+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class AlphaSchedule:
    """Repellence strength as a function of the step counter ``n``.

    Kinds
    -----
    constant(alpha)
    sigmoid1(a, b, cap)  ``alpha(n) = min(cap, 1 / (a + exp(-n + b N)))``
    sigmoid2(a, b)       ``alpha(n) = n / (a + b n)``
    table(n0:a0, n1:a1, ...)  piecewise constant from each breakpoint on
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        k, p = self.kind, tuple(float(v) for v in self.params)
        if k == "constant":
            if len(p) != 1:
                raise ConfigError("constant schedule takes one value")
            _checked(p[0])
        elif k == "sigmoid1":
            if len(p) == 2:
                p = p + (1.0 / p[0] if p[0] > 0 else math.inf,)
            if len(p) != 3 or p[0] <= 0 or p[1] < 0 or p[2] <= 0:
                raise ConfigError("sigmoid1 needs a > 0, b >= 0 and a positive cap")
        elif k == "sigmoid2":
            if len(p) != 2 or p[0] <= 0 or p[1] < 0:
                raise ConfigError("sigmoid2 needs a > 0 and b >= 0")
        elif k == "table":
            if len(p) < 2 or len(p) % 2:
                raise ConfigError("table needs (breakpoint, alpha) pairs")
            starts = p[0::2]
            if starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])):
                raise ConfigError("table breakpoints must start at 0 and increase")
            for a in p[1::2]:
                _checked(a)
        else:
            raise ConfigError(f"unknown schedule kind {k!r}")
        object.__setattr__(self, "params", p)

    @classmethod
    def constant(cls, alpha: float) -> AlphaSchedule:
        return cls("constant", (alpha,))

    @classmethod
    def parse(cls, text: str) -> AlphaSchedule:
        """Parse ``"0.5"``, ``"sigmoid2(100, 0.5)"`` or ``"table(0:0, 1000:2)"``."""
        text = str(text).strip()
        try:
            return cls.constant(float(text))
        except ValueError:
            pass
        m = _SCHEDULE_RE.match(text)
        if not m:
            raise ConfigError(f"cannot parse alpha schedule {text!r}")
        kind, body = m.group(1), m.group(2) or ""
        items = [s.strip() for s in body.split(",") if s.strip()]
        try:
            if kind == "table":
                params = []
                for item in items:
                    n0, a0 = item.split(":")
                    params += [float(n0), float(a0)]
            else:
                params = [float(v) for v in items]
        except ValueError:
            raise ConfigError(f"cannot parse alpha schedule {text!r}") from None
        return cls(kind, tuple(params))

    def __str__(self):
        p = self.params
        if self.kind == "constant":
            return repr(p[0])
        if self.kind == "table":
            return "table(" + ", ".join(f"{int(n)}:{a!r}" for n, a in zip(p[0::2], p[1::2])) + ")"
        return f"{self.kind}(" + ", ".join(repr(v) for v in p) + ")"

    @property
    def label(self) -> str:
        return f"alpha={self.params[0]:g}" if self.kind == "constant" else str(self)

    def values(self, start: int, count: int, n_nodes: int) -> np.ndarray:
        """``alpha(n)`` for ``n = start .. start + count - 1``."""
        n = np.arange(start, start + count, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full(count, p[0])
        if self.kind == "sigmoid1":
            z = np.clip(-n + p[1] * n_nodes, -700.0, 700.0)
            return np.minimum(p[2], 1.0 / (p[0] + np.exp(z)))
        if self.kind == "sigmoid2":
            return n / (p[0] + p[1] * n)
        starts = np.asarray(p[0::2])
        levels = np.asarray(p[1::2])
        return levels[np.searchsorted(starts, n, side="right") - 1]

    def __call__(self, n: int, n_nodes: int = 0) -> float:
        return float(self.values(n, 1, n_nodes)[0])


# ---------------------------------------------------------------------------
# truncation


@dataclass(frozen=True)
class TruncationFamily:
    """Compact sets ``K_k = {x : 1/(k+M) <= x_i <= 1 - 1/(k+M)}``."""

    M: float

    def __post_init__(self):
        if not self.M > 0:
            raise ConfigError("truncation parameter M must be positive")

    def bounds(self, kappa: int) -> tuple[float, float]:
        lo = 1.0 / (kappa + self.M)
        return lo, 1.0 - lo

    def contains(self, x, kappa: int) -> bool:
        lo, hi = self.bounds(kappa)
        x = np.asarray(x)
        return bool(np.all(x >= lo) and np.all(x <= hi))


RESTART_POLICIES = ("original", "dirichlet")


def _restart_point(x0: np.ndarray, family: TruncationFamily, policy: str,
                   rng: np.random.Generator) -> np.ndarray:
    if policy == "original":
        return x0
    if policy != "dirichlet":
        raise ConfigError(f"unknown restart policy {policy!r}")
    n = len(x0)
    d = rng.dirichlet(np.ones(n))
    # shrink towards uniform (which lies in K_0 because M >= N) until inside K_0
    lo, hi = family.bounds(0)
    u = 1.0 / n
    theta = 0.0
    below = d < lo
    if np.any(below):
        theta = max(theta, float(np.max((lo - d[below]) / (u - d[below]))))
    above = d > hi
    if np.any(above):
        theta = max(theta, float(np.max((d[above] - hi) / (d[above] - u))))
    return (1 - theta) * d + theta * u


# ---------------------------------------------------------------------------
# reference semantics


@dataclass
class RunState:
    """Mutable state of one walk.

    ``sigma`` is the step-size index, ``kappa`` the active compact set and
    ``nu`` the number of steps since the last truncation. Without truncation
    ``sigma == nu == n`` and ``kappa == 0``.
    """

    node: int
    measure: EmpiricalMeasure
    rng: np.random.Generator
    n: int = 0
    sigma: int = 0
    kappa: int = 0
    nu: int = 0
    start_node: int = -1
    x0: np.ndarray = None
    t0: float = None
    visits: np.ndarray = None
    truncations: list = field(default_factory=list)

    def __post_init__(self):
        if self.start_node < 0:
            self.start_node = self.node
        if self.x0 is None:
            self.x0 = self.measure.x.copy()
        if self.t0 is None:
            self.t0 = self.measure.total
        if self.visits is None:
            self.visits = np.zeros(len(self.measure.counts), dtype=np.int64)

    @property
    def x(self) -> np.ndarray:
        return self.measure.x


def step(state: RunState, kernel: ReversibleKernel, schedule: AlphaSchedule) -> RunState:
    """One step: move with ``K[x_n]`` at ``alpha(n)``, then add one visit. Mutates ``state``."""
    alpha = schedule(state.n, kernel.n)
    row = kernel_row(kernel, state.measure.counts, state.node, alpha)
    nxt = sample_next(row, state.rng.random())
    state.measure.counts[nxt] += 1.0
    state.measure.total += 1.0
    state.visits[nxt] += 1
    state.node = nxt
    state.n += 1
    state.sigma += 1
    state.nu += 1
    return state


def step_truncated(state: RunState, kernel: ReversibleKernel, schedule: AlphaSchedule,
                   family: TruncationFamily, restart: str = "original") -> RunState:
    """One step of the truncated recursion. Mutates ``state``.

    The half-step uses step size ``1 / (t0 + sigma + 1)``. If it leaves the
    active set, the measure restarts inside ``K_0`` with the step-size index
    rewound to ``sigma + 1 - nu``, the active set grows and the walker returns
    to its starting node.
    """
    if not family.contains(state.x0, 0):
        raise ConfigError("restart point lies outside the initial compact set")
    alpha = schedule(state.n, kernel.n)
    row = kernel_row(kernel, state.measure.counts, state.node, alpha)
    nxt = sample_next(row, state.rng.random())
    half = state.measure.counts.copy()
    half[nxt] += 1.0
    total = state.measure.total + 1.0
    state.n += 1
    if family.contains(half / total, state.kappa):
        state.measure.counts = half
        state.measure.total = total
        state.visits[nxt] += 1
        state.node = nxt
        state.sigma += 1
        state.nu += 1
        return state
    state.sigma = state.sigma + 1 - state.nu
    state.kappa += 1
    state.nu = 0
    point = _restart_point(state.x0, family, restart, state.rng)
    scale = state.t0 + state.sigma
    state.measure.counts = point * scale
    state.measure.total = scale
    state.node = state.start_node
    state.truncations.append(state.n)
    return state


# ---------------------------------------------------------------------------
# compiled runs


def geometric_checkpoints(n_max: int, ratio: float = 1.2) -> np.ndarray:
    """``0``, ``n_max`` and the integer parts of ``ratio**k`` in between."""
    if n_max <= 0:
        return np.array([0], dtype=np.int64)
    kmax = int(math.ceil(math.log(n_max) / math.log(ratio))) + 1
    pts = np.floor(ratio ** np.arange(kmax + 1)).astype(np.int64)
    pts = np.concatenate([[0], pts[pts < n_max], [n_max]])
    return np.unique(pts)


@dataclass
class RunConfig:
    """Everything one walk needs besides its seed.

    ``g`` is the function whose mean is estimated; it defaults to the node
    degree when a graph is attached and to the node index otherwise.
    ``start`` is ``"random"`` or a node id. ``tvd_measure`` selects whether
    TVD is computed on the prior-inclusive ``x_n`` or the visits-only
    empirical distribution.
    """

    kernel: ReversibleKernel
    schedule: AlphaSchedule = field(default_factory=lambda: AlphaSchedule.constant(0.0))
    n_max: int = 1000
    checkpoints: np.ndarray | None = None
    truncation: float | None = None
    restart: str = "original"
    init_mode: object = "uniform"
    g: np.ndarray | None = None
    start: object = "random"
    record_x: bool = False
    tvd_measure: str = "prior"

    def __post_init__(self):
        if self.n_max < 0:
            raise ConfigError("horizon must be non-negative")
        if self.restart not in RESTART_POLICIES:
            raise ConfigError(f"restart policy must be one of {RESTART_POLICIES}")
        if self.tvd_measure not in ("prior", "visits"):
            raise ConfigError("tvd_measure must be 'prior' or 'visits'")
        if self.truncation is not None:
            TruncationFamily(self.truncation)
        if not isinstance(self.start, str) and not 0 <= int(self.start) < self.kernel.n:
            raise ConfigError("start node out of range")
        if self.g is not None and np.shape(self.g) != (self.kernel.n,):
            raise ConfigError("g must have one value per node")

    def grid(self) -> np.ndarray:
        if self.checkpoints is None:
            return geometric_checkpoints(self.n_max)
        pts = np.unique(np.asarray(self.checkpoints, dtype=np.int64))
        if pts.size and (pts[0] < 0 or pts[-1] > self.n_max):
            raise ConfigError("checkpoints must lie in [0, n_max]")
        return np.unique(np.concatenate([[0], pts, [self.n_max]]))

    def function_values(self) -> np.ndarray:
        if self.g is not None:
            return np.asarray(self.g, dtype=float)
        if self.kernel.graph is not None:
            return np.array(self.kernel.graph.degrees, dtype=float)
        return np.arange(self.kernel.n, dtype=float)

    def initial_measure(self) -> EmpiricalMeasure:
        source = self.kernel.graph if self.kernel.graph is not None else self.kernel.n
        return init_measure(source, self.init_mode)


@dataclass
class RunRecord:
    """Checkpointed trace of one walk.

    ``psi`` is the plain ergodic average of ``g`` over actual visits and
    ``psi_hat`` the average reweighted by ``1/mu``; both are NaN at ``n = 0``.
    """

    checkpoints: np.ndarray
    tvd: np.ndarray
    psi: np.ndarray
    psi_hat: np.ndarray
    x_final: np.ndarray
    visits: np.ndarray
    truncation_steps: np.ndarray
    counters: tuple
    start_node: int
    x_checkpoints: np.ndarray | None = None

    @property
    def truncations(self) -> int:
        return len(self.truncation_steps)

    def same_as(self, other: RunRecord) -> bool:
        """Bitwise equality of every recorded array."""
        pairs = [(self.checkpoints, other.checkpoints), (self.tvd, other.tvd), (self.psi, other.psi),
                 (self.psi_hat, other.psi_hat), (self.x_final, other.x_final), (self.visits, other.visits),
                 (self.truncation_steps, other.truncation_steps)]
        if (self.x_checkpoints is None) != (other.x_checkpoints is None):
            return False
        if self.x_checkpoints is not None:
            pairs.append((self.x_checkpoints, other.x_checkpoints))
        return (self.counters == other.counters and self.start_node == other.start_node
                and all(a.shape == b.shape and a.tobytes() == b.tobytes() for a, b in pairs))


def run_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Counter-based child seed; independent of how runs are scheduled."""
    return np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(index),))


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _estimates(visits: np.ndarray, g: np.ndarray, inv_mu: np.ndarray) -> tuple[float, float]:
    n = visits.sum()
    if n == 0:
        return math.nan, math.nan
    v = visits.astype(float)
    return float(g @ v / n), float((inv_mu * g) @ v / (inv_mu @ v))


def run(cfg: RunConfig, seed) -> RunRecord:
    """Simulate one walk to ``cfg.n_max`` recording metrics at the checkpoints."""
    k = cfg.kernel
    n_nodes = k.n
    walk_ss, restart_ss = _as_seed_sequence(seed).spawn(2)
    rng = np.random.Generator(np.random.PCG64(walk_ss))
    restart_rng = np.random.Generator(np.random.PCG64(restart_ss))

    p = k.csr
    indptr = p.indptr.astype(np.int64)
    indices = p.indices.astype(np.int64)
    pvals = p.data.astype(float)
    logp = np.log(pvals)
    logmu = np.log(k.mu)
    scratch = np.empty(int(np.diff(indptr).max()) + 1)

    m0 = cfg.initial_measure()
    x0 = m0.x.copy()
    t0 = m0.total
    family = TruncationFamily(cfg.truncation) if cfg.truncation is not None else None
    if family is not None and not family.contains(x0, 0):
        raise ConfigError(f"initial measure lies outside K_0 for M={cfg.truncation}")

    start = int(rng.integers(n_nodes)) if cfg.start == "random" else int(cfg.start)
    counts = m0.counts.astype(float).copy()
    logc = np.log(counts)
    visits = np.zeros(n_nodes, dtype=np.int64)
    state_i = np.zeros(6, dtype=np.int64)
    state_i[_walk.NODE] = start
    state_f = np.array([t0])

    g = cfg.function_values()
    inv_mu = 1.0 / k.mu
    grid = cfg.grid()
    tvd_v = np.empty(len(grid))
    psi_v = np.empty(len(grid))
    psih_v = np.empty(len(grid))
    xs = np.empty((len(grid), n_nodes)) if cfg.record_x else None
    trunc_steps = []

    def record(idx):
        x = counts / state_f[0]
        if cfg.tvd_measure == "visits" and visits.sum() > 0:
            tvd_v[idx] = tvd(visits / visits.sum(), k.mu)
        else:
            tvd_v[idx] = tvd(x, k.mu)
        psi_v[idx], psih_v[idx] = _estimates(visits, g, inv_mu)
        if xs is not None:
            xs[idx] = x

    buf = np.empty(0)
    pos = 0
    record(0)
    for idx in range(1, len(grid)):
        while state_i[_walk.STEP] < grid[idx]:
            if pos == len(buf):
                buf = rng.random(CHUNK)
                pos = 0
            n_now = int(state_i[_walk.STEP])
            todo = min(int(grid[idx]) - n_now, len(buf) - pos)
            alphas = cfg.schedule.values(n_now, todo, n_nodes)
            used = _walk.advance(indptr, indices, logp, pvals, logmu, counts, logc, visits,
                                 state_i, state_f, buf[pos:pos + todo], alphas, todo,
                                 family is not None, float(cfg.truncation or 0.0), scratch)
            pos += used
            if state_i[_walk.FLAG]:
                trunc_steps.append(int(state_i[_walk.STEP]))
                sigma = state_i[_walk.SIGMA] + 1 - state_i[_walk.NU]
                state_i[_walk.SIGMA] = sigma
                state_i[_walk.KAPPA] += 1
                state_i[_walk.NU] = 0
                point = _restart_point(x0, family, cfg.restart, restart_rng)
                counts[:] = point * (t0 + sigma)
                logc[:] = np.log(counts)
                state_f[0] = t0 + sigma
                state_i[_walk.NODE] = start
        record(idx)

    return RunRecord(
        checkpoints=grid,
        tvd=tvd_v,
        psi=psi_v,
        psi_hat=psih_v,
        x_final=counts / state_f[0],
        visits=visits,
        truncation_steps=np.array(trunc_steps, dtype=np.int64),
        counters=(int(state_i[_walk.SIGMA]), int(state_i[_walk.KAPPA]), int(state_i[_walk.NU])),
        start_node=start,
        x_checkpoints=xs,
    )


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleRecord:
    """Run-index-ordered reduction of ``K`` independent walks."""

    label: str
    checkpoints: np.ndarray
    mean_tvd: np.ndarray
    se_tvd: np.ndarray
    mse: np.ndarray
    se_mse: np.ndarray
    mse_hat: np.ndarray
    se_mse_hat: np.ndarray
    psi_mean: np.ndarray
    psi_hat_mean: np.ndarray
    truth: float
    truth_hat: float
    final_x: np.ndarray
    final_psi: np.ndarray
    final_psi_hat: np.ndarray
    truncations: np.ndarray

    @property
    def runs(self) -> int:
        return len(self.final_x)

    CSV_COLUMNS = ("n", "alpha_label", "mean_tvd", "mse", "psi_mean", "psi_hat_mean",
                   "tvd_se", "mse_se", "mse_hat", "mse_hat_se")

    def csv_rows(self):
        for i, n in enumerate(self.checkpoints):
            yield (int(n), self.label, self.mean_tvd[i], self.mse[i], self.psi_mean[i],
                   self.psi_hat_mean[i], self.se_tvd[i], self.se_mse[i], self.mse_hat[i],
                   self.se_mse_hat[i])


def _se(a: np.ndarray) -> np.ndarray:
    if a.shape[0] < 2:
        return np.zeros(a.shape[1:])
    return a.std(axis=0, ddof=1) / math.sqrt(a.shape[0])


def reduce_records(records: list[RunRecord], cfg: RunConfig, label: str) -> EnsembleRecord:
    g = cfg.function_values()
    truth = float(g @ cfg.kernel.mu)
    truth_hat = float(g.mean())
    tv = np.stack([r.tvd for r in records])
    psi = np.stack([r.psi for r in records])
    psih = np.stack([r.psi_hat for r in records])
    with np.errstate(invalid="ignore"):
        sq = (psi - truth) ** 2
        sqh = (psih - truth_hat) ** 2
        return EnsembleRecord(
            label=label,
            checkpoints=records[0].checkpoints,
            mean_tvd=tv.mean(axis=0),
            se_tvd=_se(tv),
            mse=np.array([mse(col, truth) if np.all(np.isfinite(col)) else math.nan for col in psi.T]),
            se_mse=_se(sq),
            mse_hat=np.array([mse(col, truth_hat) if np.all(np.isfinite(col)) else math.nan for col in psih.T]),
            se_mse_hat=_se(sqh),
            psi_mean=psi.mean(axis=0),
            psi_hat_mean=psih.mean(axis=0),
            truth=truth,
            truth_hat=truth_hat,
            final_x=np.stack([r.x_final for r in records]),
            final_psi=psi[:, -1].copy(),
            final_psi_hat=psih[:, -1].copy(),
            truncations=np.array([r.truncations for r in records]),
        )


def _run_indexed(args):
    cfg, base_seed, index = args
    return run(cfg, run_seed(base_seed, index))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_ensemble(cfg: RunConfig, K: int, base_seed: int, workers: int | None = 1,
                 label: str | None = None, keep_runs: bool = False):
    """``K`` independent walks reduced in run-index order.

    The result does not depend on ``workers``; each run draws from its own
    child seed. With ``keep_runs`` the individual records are returned too.
    """
    if K < 1:
        raise ConfigError("ensemble needs at least one run")
    workers = min(default_workers() if workers is None else max(1, int(workers)), K)
    jobs = [(cfg, base_seed, i) for i in range(K)]
    if workers == 1:
        records = [_run_indexed(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_indexed, jobs, chunksize=max(1, K // (4 * workers))))
    ens = reduce_records(records, cfg, label or cfg.schedule.label)
    return (ens, records) if keep_runs else ens
