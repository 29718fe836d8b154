"""Figures written next to the CSV outputs.

Uses the object-oriented Agg canvas directly so no GUI backend is touched
and repeated renders of the same data give identical PNG bytes.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_METADATA = {"Software": None}


def _figure(ncols=1, width=5.0, height=3.6):
    fig = Figure(figsize=(width * ncols, height), dpi=110, layout="constrained")
    FigureCanvasAgg(fig)
    axes = [fig.add_subplot(1, ncols, i + 1) for i in range(ncols)]
    return fig, axes


def _save(fig, path):
    fig.savefig(path, metadata=_METADATA)


def plot_convergence(ensembles, path) -> None:
    """Mean TVD and MSE against ``n`` on log-log axes, one curve per ensemble."""
    fig, (ax_t, ax_m) = _figure(2)
    for ens in ensembles:
        keep = ens.checkpoints > 0
        n = ens.checkpoints[keep]
        ax_t.loglog(n, ens.mean_tvd[keep], label=ens.label)
        ax_m.loglog(n, ens.mse[keep], label=ens.label)
    ax_t.set(xlabel="steps n", ylabel="mean TVD(x_n, mu)")
    ax_m.set(xlabel="steps n", ylabel="MSE of the estimator")
    ax_m.legend(fontsize=7)
    for ax in (ax_t, ax_m):
        ax.grid(True, which="major", alpha=0.3)
    _save(fig, path)


def plot_spectrum(spectrum, path, slem_value=None) -> None:
    fig, (ax,) = _figure()
    lam = spectrum.eigenvalues
    ax.plot(np.arange(1, len(lam) + 1), lam, ".", ms=4)
    ax.axhline(0.0, color="0.6", lw=0.6)
    title = "eigenvalues of P"
    if slem_value is not None:
        title += f" (SLEM {slem_value:.4f})"
    ax.set(xlabel="index", ylabel="lambda", ylim=(-1.05, 1.05), title=title)
    _save(fig, path)


def plot_trajectory(traj, mu, path, column: int = 0) -> None:
    """Components of ``x(t)`` (dashed lines at ``mu``) and the Lyapunov value."""
    states = traj.states if traj.states.ndim == 2 else traj.states[:, column]
    w = traj.lyapunov if traj.lyapunov.ndim == 1 else traj.lyapunov[:, column]
    fig, (ax_x, ax_w) = _figure(2)
    ax_x.plot(traj.times, states, lw=0.9)
    for m in mu:
        ax_x.axhline(m, color="0.5", lw=0.5, ls="--")
    ax_x.set(xlabel="t", ylabel="x_i(t)")
    ax_w.plot(traj.times, w, color="k", lw=1)
    ax_w.set(xlabel="t", ylabel="w(x(t))")
    _save(fig, path)


def plot_analysis(rows, path) -> None:
    """Variance ratio and its bound against ``alpha`` for each function."""
    fig, (ax,) = _figure()
    for gid in dict.fromkeys(r[1] for r in rows):
        sel = [r for r in rows if r[1] == gid]
        a = [r[0] for r in sel]
        ax.plot(a, [r[4] for r in sel], "o-", ms=3, label=f"{gid}: ratio")
        ax.plot(a, [r[3] for r in sel], "s--", ms=3, label=f"{gid}: bound")
    ax.set(xlabel="alpha", ylabel="g'V(alpha)g / g'V(0)g", yscale="log")
    ax.legend(fontsize=7)
    ax.grid(True, alpha=0.3)
    _save(fig, path)
