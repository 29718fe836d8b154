"""Time-reversible base chains (P, mu) and their spectra."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import NonErgodicError, ReversibilityError
from .graph import Graph, require_connected

DENSE_LIMIT = 5000


@dataclass(frozen=True, eq=False)
class ReversibleKernel:
    """Row-stochastic ``P`` with stationary distribution ``mu``.

    ``P`` is dense for ``N <= DENSE_LIMIT`` and CSR above; use :meth:`dense`
    or :attr:`csr` to get a specific representation.
    """

    P: np.ndarray | sp.csr_array
    mu: np.ndarray
    graph: Graph | None = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or self.P.shape != (len(mu), len(mu)):
            raise ValueError("P must be N x N and mu of length N")
        if np.any(mu <= 0):
            raise ValueError("stationary distribution must be strictly positive")
        mu = mu / mu.sum()
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return len(self.mu)

    def dense(self) -> np.ndarray:
        return self.P.toarray() if sp.issparse(self.P) else self.P

    @cached_property
    def csr(self) -> sp.csr_array:
        m = sp.csr_array(self.P)
        m.eliminate_zeros()
        m.sort_indices()
        return m

    def row_sum_error(self) -> float:
        rows = np.asarray(self.csr.sum(axis=1)).ravel()
        return float(np.max(np.abs(rows - 1.0)))

    def is_aperiodic(self) -> bool:
        """True when some holding probability is positive or the support is not bipartite."""
        if np.any(self.csr.diagonal() > 0):
            return True
        if self.graph is not None:
            return not self.graph.is_bipartite()
        support = Graph(self.n, np.column_stack(sp.triu(self.csr, k=1).nonzero()),
                        np.ones(sp.triu(self.csr, k=1).nnz))
        return not support.is_bipartite()

    def lazy(self, holding: float) -> ReversibleKernel:
        """``(1 - holding) P + holding I``; same ``mu``, spectrum mapped affinely."""
        if not 0 <= holding < 1:
            raise ValueError("holding probability must lie in [0, 1)")
        if holding == 0:
            return self
        if sp.issparse(self.P):
            P = (1 - holding) * self.csr + holding * sp.eye_array(self.n, format="csr")
        else:
            P = (1 - holding) * self.P + holding * np.eye(self.n)
        return ReversibleKernel(P, self.mu, self.graph)


def _from_rows(g: Graph, values: np.ndarray, diag: np.ndarray, mu: np.ndarray) -> ReversibleKernel:
    a = g.adjacency
    rows = np.repeat(np.arange(g.n), np.diff(a.indptr))
    if g.n <= DENSE_LIMIT:
        P = np.zeros((g.n, g.n))
        P[rows, a.indices] = values
        P[np.arange(g.n), np.arange(g.n)] = diag
    else:
        off = sp.csr_array((values, (rows, a.indices)), shape=(g.n, g.n))
        P = sp.csr_array(off + sp.diags_array(diag, format="csr"))
    return ReversibleKernel(P, mu, g)


def build_srw(g: Graph) -> ReversibleKernel:
    """Simple random walk: ``P_ij = a_ij / deg(i)``, ``mu`` proportional to degree."""
    require_connected(g)
    a = g.adjacency
    deg = g.degrees
    rows = np.repeat(np.arange(g.n), np.diff(a.indptr))
    return _from_rows(g, a.data / deg[rows], np.zeros(g.n), deg / deg.sum())


def build_mhrw(g: Graph, target=None) -> ReversibleKernel:
    """Metropolis-Hastings walk with the SRW proposal.

    ``P_ij = (1/deg(i)) min{1, mu_j deg(i) / (mu_i deg(j))}`` on edges and the
    leftover mass on the diagonal. A uniform target gives
    ``min{1/deg(i), 1/deg(j)}``. ``target`` may be unnormalised; ``None`` means
    uniform.
    """
    require_connected(g)
    target = np.ones(g.n) if target is None else np.asarray(target, dtype=float)
    if target.shape != (g.n,):
        raise ValueError(f"target has length {target.size}, graph has {g.n} nodes")
    if np.any(~np.isfinite(target)) or np.any(target <= 0):
        raise ValueError("target must be strictly positive")
    a = g.adjacency
    deg = g.degrees
    rows = np.repeat(np.arange(g.n), np.diff(a.indptr))
    cols = a.indices
    proposal = a.data / deg[rows]
    back = a.data / deg[cols]
    # accept = min(1, mu_j q_ji / (mu_i q_ij)); unit weights reduce to mu_j deg(i) / (mu_i deg(j))
    vals = np.minimum(proposal, target[cols] * back / target[rows])
    offsum = np.bincount(rows, weights=vals, minlength=g.n)
    diag = np.clip(1.0 - offsum, 0.0, None)
    return _from_rows(g, vals, diag, target / target.sum())


def verify_dbe(k: ReversibleKernel) -> float:
    """Largest detailed-balance violation ``max |mu_i P_ij - mu_j P_ji|``."""
    flow = k.csr.multiply(k.mu[:, None])
    return float(abs(flow - flow.T).max()) if flow.nnz else 0.0


def random_reversible_kernel(n: int, rng: np.random.Generator, density: float = 0.6,
                             holding: bool = True) -> ReversibleKernel:
    """Random reversible chain from a symmetric positive weight matrix.

    ``P = D^-1 W`` with ``W`` symmetric is reversible w.r.t. row sums of ``W``.
    A spanning path keeps the chain irreducible; positive diagonal weights make
    it aperiodic.
    """
    W = np.triu(rng.uniform(0.1, 1.0, (n, n)) * (rng.random((n, n)) < density), k=1)
    perm = rng.permutation(n)
    W[np.minimum(perm[:-1], perm[1:]), np.maximum(perm[:-1], perm[1:])] += rng.uniform(0.1, 1.0, n - 1)
    W = W + W.T
    if holding:
        W[np.diag_indices(n)] = rng.uniform(0.05, 1.0, n)
    s = W.sum(axis=1)
    return ReversibleKernel(W / s[:, None], s / s.sum())


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition of a reversible kernel.

    ``eigenvalues`` ascend, so the last one is 1. Column ``i`` of ``left`` is
    the left eigenvector ``u_i`` and of ``right`` the right eigenvector
    ``v_i``, normalised so ``u_i = D_mu v_i`` and ``u_i . v_j = delta_ij``.
    """

    eigenvalues: np.ndarray
    left: np.ndarray
    right: np.ndarray
    mu: np.ndarray

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        """``sum_i lambda_i v_i u_i^T``, which equals ``P``."""
        return (self.right * self.eigenvalues) @ self.left.T


def compute_spectrum(k: ReversibleKernel, tol: float = 1e-8) -> Spectrum:
    """Symmetrise ``P`` with ``D_mu^1/2`` and diagonalise.

    Raises ReversibilityError if the symmetrised matrix is not symmetric to
    ``tol`` (max entry).
    """
    P = k.dense()
    s = np.sqrt(k.mu)
    S = s[:, None] * P / s[None, :]
    resid = float(np.max(np.abs(S - S.T)))
    if resid > tol:
        raise ReversibilityError(f"symmetrisation residual {resid:.3e} exceeds {tol:.1e}")
    lam, phi = np.linalg.eigh(0.5 * (S + S.T))
    left = s[:, None] * phi
    right = phi / s[:, None]
    # deterministic signs: largest-magnitude entry of each v_i positive
    idx = np.argmax(np.abs(right), axis=0)
    signs = np.sign(right[idx, np.arange(k.n)])
    signs[signs == 0] = 1.0
    left *= signs
    right *= signs
    left[:, -1] = k.mu
    right[:, -1] = 1.0
    for arr in (lam, left, right):
        arr.setflags(write=False)
    return Spectrum(lam, left, right, k.mu)


def slem(s: Spectrum, tol: float = 1e-10) -> float:
    """Second largest eigenvalue modulus ``max(|lambda_1|, |lambda_{N-1}|)``."""
    if s.n < 2:
        return 0.0
    lam = s.eigenvalues
    if lam[0] <= -1 + tol:
        raise NonErgodicError(f"periodic chain: smallest eigenvalue {lam[0]:.12g}")
    if lam[-2] >= 1 - tol:
        raise NonErgodicError(f"reducible chain: second eigenvalue {lam[-2]:.12g}")
    return float(max(abs(lam[0]), abs(lam[-2])))


def write_kernel_csv(k: ReversibleKernel, kernel_path, mu_path) -> None:
    """Dump ``(i, j, P_ij)`` triples and the stationary vector."""
    m = k.csr.tocoo()
    order = np.lexsort((m.col, m.row))
    with open(kernel_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,p\n")
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r},{c},{v!r}\n")
    with open(mu_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,mu\n")
        for i, v in enumerate(k.mu):
            fh.write(f"{i},{float(v)!r}\n")


def write_spectrum_csv(s: Spectrum, values_path, left_path, right_path) -> None:
    with open(values_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,lambda\n")
        for i, v in enumerate(s.eigenvalues, start=1):
            fh.write(f"{i},{float(v)!r}\n")
    for path, mat in ((left_path, s.left), (right_path, s.right)):
        np.savetxt(path, mat, delimiter=",", fmt="%.17g")
