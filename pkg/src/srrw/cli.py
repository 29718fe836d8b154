"""Command-line entry point: ``srrw {spectrum,simulate,ode,analyze,validate}``."""

from __future__ import annotations

import argparse
import csv
import re
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, chain, validate
from .config import OUT_DIR_ENV, ExperimentConfig
from .errors import ConfigError, ConnectivityError, EdgeListError, GraphError, SRRWError
from .estimators import tvd
from .ode import integrate, lyapunov
from .process import run_ensemble

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", text).strip("_")


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        # lazy walk on a single edge: P = [[.5, .5], [.5, .5]]
        cfg = ExperimentConfig(generator="path:2", kernel="srw", laziness=0.5, g="index")
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    return cfg


def _outdir(args, cfg) -> Path:
    out = cfg.output_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _constant_alphas(cfg) -> list[float]:
    vals = []
    for a in cfg.alphas:
        if a.kind != "constant":
            raise ConfigError(f"this command needs constant alpha values, got {a}")
        vals.append(a.params[0])
    return vals


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    g = cfg.build_graph()
    k = cfg.build_kernel(g)
    out = _outdir(args, cfg)
    viol = chain.verify_dbe(k)
    s = chain.compute_spectrum(k)
    chain.write_kernel_csv(k, out / "kernel.csv", out / "mu.csv")
    chain.write_spectrum_csv(s, out / "eigenvalues.csv", out / "left.csv", out / "right.csv")
    value = chain.slem(s)
    if not args.no_plot:
        from .plotting import plot_spectrum
        plot_spectrum(s, out / "spectrum.png", value)
    print(f"nodes {g.n}  edges {g.edge_count}  kernel {cfg.kernel}  dbe_violation {viol:.3e}")
    print(f"aperiodic {k.is_aperiodic()}")
    print(f"SLEM {value:.12g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    g = cfg.build_graph()
    k = cfg.build_kernel(g)
    out = _outdir(args, cfg)
    ensembles = []
    combined = []
    header = ("n", "alpha_label", "mean_tvd", "mse", "psi_mean", "psi_hat_mean",
              "tvd_se", "mse_se", "mse_hat", "mse_hat_se")
    print(f"nodes {g.n}  edges {g.edge_count}  K {cfg.K}  n_max {cfg.n_max}  seed {cfg.seed}")
    for idx, sched in enumerate(cfg.alphas):
        rc = cfg.run_config(k, sched, g)
        ens = run_ensemble(rc, cfg.K, cfg.seed, workers=args.workers)
        rows = list(ens.csv_rows())
        _write_csv(out / f"metrics_{idx:02d}_{_slug(ens.label)}.csv", header, rows)
        combined.extend(rows)
        ensembles.append(ens)
        tr = ens.truncations
        print(f"{ens.label}: final mean TVD {ens.mean_tvd[-1]:.4e}  MSE {ens.mse[-1]:.4e}  "
              f"truncations total {int(tr.sum())}, runs with any {int((tr > 0).sum())}/{cfg.K}")
    _write_csv(out / "metrics.csv", header, combined)
    if not args.no_plot:
        from .plotting import plot_convergence
        plot_convergence(ensembles, out / "convergence.png")
    return EXIT_OK


def cmd_ode(args) -> int:
    cfg = _load(args)
    g = cfg.build_graph()
    k = cfg.build_kernel(g)
    out = _outdir(args, cfg)
    rng = np.random.default_rng(cfg.seed)
    starts = np.vstack([np.full(k.n, 1.0 / k.n), rng.dirichlet(np.ones(k.n), cfg.ode_starts - 1)])
    for idx, a in enumerate(_constant_alphas(cfg)):
        traj = integrate(k, starts, a, T=cfg.ode_T, dt=cfg.ode_dt)
        for s in range(cfg.ode_starts):
            traj.write_csv(out / f"trajectory_{idx:02d}_start{s:03d}.csv", column=s)
        worst = max(tvd(x, k.mu) for x in traj.final)
        w_end = lyapunov(k, traj.final, a)
        print(f"alpha={a:g}: max TVD(x(T), mu) {worst:.3e}  max w(x(T)) {float(np.max(w_end)):.12g}  "
              f"worst Lyapunov step {traj.max_lyapunov_step:.1e}  halvings {traj.halvings}")
        if not args.no_plot:
            from .plotting import plot_trajectory
            plot_trajectory(traj, k.mu, out / f"trajectory_{idx:02d}.png")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load(args)
    g = cfg.build_graph()
    k = cfg.build_kernel(g)
    out = _outdir(args, cfg)
    alphas = sorted(set(_constant_alphas(cfg)))
    s = chain.compute_spectrum(k)
    rows = asymptotics.analysis_table(s, alphas, {cfg.g: cfg.function_values(g)})
    _write_csv(out / "analysis.csv", asymptotics.ANALYSIS_COLUMNS, rows)
    if args.dump_matrices:
        np.savetxt(out / "U.csv", asymptotics.covariance_U(s), delimiter=",", fmt="%.17g")
        for idx, a in enumerate(alphas):
            np.savetxt(out / f"V_{idx:02d}.csv", asymptotics.covariance_V(s, a).matrix, delimiter=",", fmt="%.17g")
    for a, gid, var, bound, ratio, gap in rows:
        tag = "" if a >= 0 else "  (out of stated theory)"
        print(f"alpha={a:g} g={gid}: variance {var:.6g}  ratio {ratio:.6g}  bound {bound:.6g}  gap {gap:.3e}{tag}")
    if not args.no_plot:
        from .plotting import plot_analysis
        plot_analysis(rows, out / "analysis.png")
    return EXIT_OK


def cmd_validate(args) -> int:
    codes = None
    if args.only:
        codes = [c.strip().upper() for c in args.only.split(",") if c.strip()]
        unknown = [c for c in codes if c not in validate.CHECKS]
        if unknown:
            raise ConfigError(f"unknown check(s): {', '.join(unknown)}")
    results = validate.run_validation(quick=args.quick, codes=codes, inject_fault=args.inject_fault,
                                      workers=args.workers)
    failed = [r.code for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_VALIDATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="srrw",
        description="Self-repellent random walk sampler: spectra, ensembles, mean-field ODE, covariance analytics.",
        epilog=f"Output directory: --out, else the config's 'out' key, else ${OUT_DIR_ENV}, else ./srrw-out.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value experiment file")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: available CPUs, capped by K)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--no-plot", action="store_true", help="skip PNG figures")
    common.add_argument("--quick", action="store_true", help="reduced sample sizes (validate only)")

    for name, fn, help_ in (
        ("spectrum", cmd_spectrum, "base-chain spectrum and SLEM"),
        ("simulate", cmd_simulate, "ensemble simulation over the alpha entries"),
        ("ode", cmd_ode, "integrate the mean-field ODE"),
        ("analyze", cmd_analyze, "asymptotic covariance tables"),
        ("validate", cmd_validate, "run the built-in acceptance checks"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        if name == "analyze":
            sp.add_argument("--dump-matrices", action="store_true", help="also write U and V(alpha) as CSV")
        if name == "validate":
            sp.add_argument("--only", metavar="CODES", help="comma-separated subset, e.g. A1,A4")
            sp.add_argument("--inject-fault", choices=validate.FAULTS, default=None, help=argparse.SUPPRESS)
    return p


def exit_code(exc: BaseException) -> int | None:
    """Map an exception to the documented exit status; None means re-raise."""
    if isinstance(exc, ConnectivityError):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, EdgeListError, GraphError)):
        return EXIT_CONFIG
    if isinstance(exc, (SRRWError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, OSError)):
        return EXIT_CONFIG
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
