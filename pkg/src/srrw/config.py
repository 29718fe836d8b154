"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored. Every key appears at most once
except ``alpha``, which may repeat; each ``alpha`` line holds one entry or a
comma-separated list of entries (commas inside parentheses do not split).
An entry is a number or a schedule such as ``sigmoid2(100, 0.5)``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chain import ReversibleKernel, build_mhrw, build_srw
from .errors import ConfigError
from .graph import (Graph, complete_graph, cycle_graph, erdos_renyi, largest_connected_component,
                    path_graph, read_edge_list)
from .process import RESTART_POLICIES, AlphaSchedule, RunConfig, geometric_checkpoints

OUT_DIR_ENV = "SRRW_OUT_DIR"

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _split_top(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return [s for s in out if s]


@dataclass
class ExperimentConfig:
    """Everything a CLI subcommand needs.

    ``graph_path`` and ``generator`` are alternatives; a generator is one of
    ``er:n:m:seed``, ``path:n``, ``cycle:n`` or ``complete:n``. ``target``
    applies to the Metropolis-Hastings kernel and is ``uniform``, ``degree``
    or ``file:PATH`` (one positive weight per line). ``checkpoints`` is
    ``geometric:RATIO`` or an explicit comma list. ``truncation_M`` of
    ``None`` disables truncation. ``g`` is ``degree``, ``index`` or
    ``file:PATH``.
    """

    graph_path: str | None = None
    generator: str | None = None
    lcc: bool = True
    kernel: str = "mhrw"
    target: str = "uniform"
    laziness: float = 0.0
    alphas: list = field(default_factory=lambda: [AlphaSchedule.constant(0.0)])
    n_max: int = 10000
    checkpoints: str = "geometric:1.2"
    K: int = 10
    seed: int = 0
    truncation_M: float | None = None
    restart: str = "original"
    init_mode: str = "uniform"
    g: str = "degree"
    start: str = "random"
    tvd_measure: str = "prior"
    ode_T: float = 200.0
    ode_dt: float = 0.01
    ode_starts: int = 1
    out: str | None = None
    base_dir: str = field(default=".", compare=False)

    KEYS = ("graph_path", "generator", "lcc", "kernel", "target", "laziness", "alpha", "n_max",
            "checkpoints", "K", "seed", "truncation.M", "restart", "init_mode", "g", "start",
            "tvd_measure", "ode.T", "ode.dt", "ode.starts", "out")

    def __post_init__(self):
        self.validate()

    # -- parsing ---------------------------------------------------------

    @classmethod
    def parse(cls, text: str, base_dir: str = ".") -> ExperimentConfig:
        seen = {}
        alphas = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls.KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key == "alpha":
                alphas.extend(AlphaSchedule.parse(v) for v in _split_top(value))
                continue
            if key in seen:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            seen[key] = value
        kw = {}
        try:
            for key, value in seen.items():
                name = key.replace(".", "_")
                if key in ("graph_path", "generator", "out"):
                    kw[name] = value or None
                elif key == "lcc":
                    if value.lower() not in _BOOL:
                        raise ConfigError(f"lcc must be a boolean, got {value!r}")
                    kw[name] = _BOOL[value.lower()]
                elif key in ("laziness", "ode.T", "ode.dt"):
                    kw[name] = float(value)
                elif key in ("n_max", "K", "seed", "ode.starts"):
                    kw[name] = int(value)
                elif key == "truncation.M":
                    kw[name] = None if value.lower() in ("off", "none", "") else float(value)
                else:
                    kw[name] = value
        except ValueError as exc:
            raise ConfigError(f"bad value: {exc}") from None
        if alphas:
            kw["alphas"] = alphas
        return cls(base_dir=base_dir, **kw)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.parse(text, base_dir=str(path.parent))

    def serialize(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "base_dir":
                continue
            value = getattr(self, f.name)
            key = {"truncation_M": "truncation.M", "ode_T": "ode.T", "ode_dt": "ode.dt",
                   "ode_starts": "ode.starts"}.get(f.name, f.name)
            if f.name == "alphas":
                lines.extend(f"alpha = {a}" for a in value)
                continue
            if value is None:
                if f.name == "truncation_M":
                    lines.append("truncation.M = off")
                continue
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        if (self.graph_path is None) == (self.generator is None):
            raise ConfigError("give exactly one of graph_path and generator")
        if self.kernel not in ("srw", "mhrw"):
            raise ConfigError(f"kernel must be srw or mhrw, got {self.kernel!r}")
        if not (self.target in ("uniform", "degree") or self.target.startswith("file:")):
            raise ConfigError(f"bad target {self.target!r}")
        if not 0 <= self.laziness < 1:
            raise ConfigError("laziness must lie in [0, 1)")
        if not self.alphas:
            raise ConfigError("at least one alpha entry is required")
        for name in ("n_max",):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("K", "ode_starts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.truncation_M is not None and not self.truncation_M > 0:
            raise ConfigError("truncation.M must be positive")
        if self.restart not in RESTART_POLICIES:
            raise ConfigError(f"restart must be one of {RESTART_POLICIES}")
        if self.init_mode not in ("uniform", "degree"):
            raise ConfigError("init_mode must be uniform or degree")
        if not (self.g in ("degree", "index") or self.g.startswith("file:")):
            raise ConfigError(f"bad g {self.g!r}")
        if self.start != "random":
            try:
                if int(self.start) < 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("start must be 'random' or a node id") from None
        if self.tvd_measure not in ("prior", "visits"):
            raise ConfigError("tvd_measure must be prior or visits")
        if not (self.ode_T > 0 and self.ode_dt > 0):
            raise ConfigError("ode.T and ode.dt must be positive")
        self.checkpoint_grid()

    # -- builders --------------------------------------------------------

    def _path(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def _vector(self, spec: str, n: int) -> np.ndarray:
        path = self._path(spec[len("file:"):])
        try:
            v = np.loadtxt(path, dtype=float, ndmin=1)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read vector file {path}: {exc}") from None
        if v.shape != (n,):
            raise ConfigError(f"{path} holds {v.size} values, graph has {n} nodes")
        return v

    def build_graph(self) -> Graph:
        if self.graph_path is not None:
            try:
                g = read_edge_list(self._path(self.graph_path))
            except OSError as exc:
                raise ConfigError(f"cannot read graph {self.graph_path}: {exc.strerror}") from None
        else:
            parts = self.generator.split(":")
            try:
                kind, args = parts[0], [int(p) for p in parts[1:]]
                if kind == "er" and len(args) == 3:
                    g = erdos_renyi(*args)
                elif kind == "path" and len(args) == 1:
                    g = path_graph(args[0])
                elif kind == "cycle" and len(args) == 1:
                    g = cycle_graph(args[0])
                elif kind == "complete" and len(args) == 1:
                    g = complete_graph(args[0])
                else:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"bad generator {self.generator!r}") from None
        return largest_connected_component(g) if self.lcc else g

    def build_kernel(self, g: Graph) -> ReversibleKernel:
        if self.kernel == "srw":
            k = build_srw(g)
        elif self.target == "uniform":
            k = build_mhrw(g)
        elif self.target == "degree":
            k = build_mhrw(g, g.degrees)
        else:
            k = build_mhrw(g, self._vector(self.target, g.n))
        return k.lazy(self.laziness)

    def function_values(self, g: Graph) -> np.ndarray:
        if self.g == "degree":
            return np.array(g.degrees, dtype=float)
        if self.g == "index":
            return np.arange(g.n, dtype=float)
        return self._vector(self.g, g.n)

    def checkpoint_grid(self) -> np.ndarray:
        spec = self.checkpoints.strip()
        try:
            if spec.startswith("geometric:"):
                ratio = float(spec.split(":", 1)[1])
                if not ratio > 1:
                    raise ValueError
                return geometric_checkpoints(self.n_max, ratio)
            pts = np.array([int(p) for p in spec.split(",") if p.strip()], dtype=np.int64)
        except ValueError:
            raise ConfigError(f"bad checkpoints {self.checkpoints!r}") from None
        if pts.size and (pts.min() < 0 or pts.max() > self.n_max):
            raise ConfigError("checkpoints must lie in [0, n_max]")
        return np.unique(np.concatenate([[0], pts, [self.n_max]]))

    def run_config(self, k: ReversibleKernel, schedule: AlphaSchedule, g: Graph | None = None) -> RunConfig:
        start = "random" if self.start == "random" else int(self.start)
        return RunConfig(
            kernel=k,
            schedule=schedule,
            n_max=self.n_max,
            checkpoints=self.checkpoint_grid(),
            truncation=self.truncation_M,
            restart=self.restart,
            init_mode=self.init_mode,
            g=self.function_values(g if g is not None else k.graph),
            start=start,
            tvd_measure=self.tvd_measure,
        )

    def output_dir(self, override: str | None = None) -> Path:
        """CLI flag, then config ``out``, then ``$SRRW_OUT_DIR``, then ``./srrw-out``."""
        for cand in (override, self._path(self.out) if self.out else None, os.environ.get(OUT_DIR_ENV)):
            if cand:
                return Path(cand)
        return Path("srrw-out")
