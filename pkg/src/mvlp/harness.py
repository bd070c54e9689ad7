"""Experiment drivers: configuration, error metrics, convergence studies, CSV output."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .closure import ClosureConfig, PhaseGrid
from .grids import BOUNDARIES, MomentField, RandomGrid, SpatialGrid
from .models import parse_entropy
from .scenarios import Scenario, get_scenario, project_initial
from .schemes import CFL_RULES, ClosureState, RunResult, TraceRow, evolve

__all__ = [
    "EMIT_FLAGS",
    "RunConfig",
    "Prepared",
    "ConvergenceRow",
    "prepare",
    "execute",
    "l1_error",
    "convergence_rates",
    "convergence_study",
    "compare_entropies",
    "emit_outputs",
    "write_field_csv",
    "write_measure_csv",
    "write_trace_csv",
    "write_table_csv",
    "read_table_csv",
    "parse_config_text",
    "load_config",
]

EMIT_FLAGS = ("field_csv", "measure_csv", "trace_csv", "table_csv")
SCHEME_CHOICES = ("mv", "collocation", "both")


@dataclass(frozen=True)
class RunConfig:
    """One experiment; ``None`` fields fall back to the scenario defaults."""

    scenario: str = "burgers-step-xi"
    n_x: Optional[int] = None
    n_xi: Optional[int] = None
    n_u: Optional[int] = None
    lambda_f: Optional[float] = None
    cfl: float = 0.75
    t_final: Optional[float] = None
    entropy: Optional[str] = None
    relax_band: bool = False
    boundary: Optional[str] = None
    scheme: str = "both"
    cfl_rule: Optional[str] = None
    exact_projection: bool = False
    out: Optional[str] = None
    emit: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "emit", frozenset(self.emit))
        self.validate()

    def validate(self) -> None:
        get_scenario(self.scenario)
        for name, lo in (("n_x", 3), ("n_xi", 1), ("n_u", 1)):
            v = getattr(self, name)
            if v is not None and (int(v) != v or v < lo):
                raise ValueError(f"{name} must be an integer >= {lo}, got {v}")
        if self.lambda_f is not None and not (0.0 < self.lambda_f <= 1.0):
            raise ValueError(f"lambda_f must lie in (0, 1], got {self.lambda_f}")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_final is not None and not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.entropy is not None:
            parse_entropy(self.entropy)
        if self.boundary is not None and self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.scheme not in SCHEME_CHOICES:
            raise ValueError(f"scheme must be one of {SCHEME_CHOICES}, got {self.scheme!r}")
        if self.cfl_rule is not None and self.cfl_rule not in CFL_RULES:
            raise ValueError(f"cfl_rule must be one of {CFL_RULES}, got {self.cfl_rule!r}")
        bad = set(self.emit) - set(EMIT_FLAGS)
        if bad:
            raise ValueError(f"unknown emit flags {sorted(bad)}; choose from {EMIT_FLAGS}")

    @property
    def schemes(self) -> tuple:
        return ("mv", "collocation") if self.scheme == "both" else (self.scheme,)

    def to_text(self) -> str:
        """Flat ``key = value`` text accepted by :func:`parse_config_text`."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "emit":
                v = ",".join(sorted(v))
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {"n_x", "n_xi", "n_u"}
_FLOAT_KEYS = {"lambda_f", "cfl", "t_final"}
_BOOL_KEYS = {"relax_band", "exact_projection"}


def _coerce(key, text):
    text = text.strip()
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if key == "emit":
        return frozenset(p.strip() for p in text.split(",") if p.strip())
    return text


def config_values(text: str) -> dict:
    """Parse flat ``key = value`` lines (``#`` comments, dashes allowed in keys)."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key = value, got {raw!r}")
        key, val = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ValueError(f"config line {n}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def parse_config_text(text: str, **overrides) -> RunConfig:
    values = config_values(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    return parse_config_text(Path(path).read_text(), **overrides)


# ---------------------------------------------------------------------------
# running


@dataclass
class Prepared:
    config: RunConfig
    scenario: Scenario
    sgrid: SpatialGrid
    rgrid: RandomGrid
    grid: PhaseGrid
    closure_cfg: ClosureConfig
    initial: MomentField
    t_final: float
    cfl_rule: str


def prepare(config: RunConfig) -> Prepared:
    sc = get_scenario(config.scenario)
    sgrid, rgrid = sc.grids(config.n_x, config.n_xi, config.boundary)
    grid = PhaseGrid.for_model(sc.model, config.n_u or sc.n_u)
    entropy_name = config.entropy or sc.entropy
    entropy = parse_entropy(entropy_name) if entropy_name else None
    cfg = ClosureConfig(
        lambda_f=config.lambda_f if config.lambda_f is not None else sc.lambda_f,
        relax_band=config.relax_band,
        entropy=entropy,
    )
    initial = project_initial(sc, sgrid, rgrid, exact=config.exact_projection)
    return Prepared(
        config, sc, sgrid, rgrid, grid, cfg, initial,
        config.t_final if config.t_final is not None else sc.t_final,
        config.cfl_rule or sc.cfl_rule,
    )


def execute(config: RunConfig, final_measures: bool = True):
    """Run ``config``; returns ``(prepared, result)``."""
    p = prepare(config)
    res = evolve(p.initial, p.scenario.model, p.sgrid, p.rgrid, p.closure_cfg, p.grid,
                 p.t_final, config.schemes, p.cfl_rule, config.cfl,
                 final_measures=final_measures)
    return p, res


def l1_error(a: MomentField, b: MomentField, sgrid: SpatialGrid, rgrid: RandomGrid):
    """``dx * dxi * sum |a - b|``; a float for scalar fields, one entry per component otherwise."""
    if a.values.shape != b.values.shape:
        raise ValueError(f"field shapes differ: {a.values.shape} vs {b.values.shape}")
    if a.values.shape[:2] != (rgrid.n_xi, sgrid.n_x):
        raise ValueError("fields do not live on the given grids")
    err = sgrid.dx * rgrid.dxi * np.sum(np.abs(a.values - b.values), axis=(0, 1))
    return float(err[0]) if err.size == 1 else err


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    error: float
    rate: Optional[float] = None


def convergence_rates(ns: Sequence[int], errors: Sequence[float]) -> list:
    rows = []
    for k, (n, e) in enumerate(zip(ns, errors)):
        rate = None
        if k > 0:
            n1, e1 = ns[k - 1], errors[k - 1]
            rate = math.log(e1 / e) / math.log(n / n1)
        rows.append(ConvergenceRow(int(n), float(e), rate))
    return rows


def _study_case(config: RunConfig) -> float:
    p, res = execute(replace(config, scheme="both"), final_measures=False)
    err = l1_error(res.mv, res.collocation, p.sgrid, p.rgrid)
    return float(np.sum(err))


def worker_count() -> int:
    raw = os.environ.get("MVLP_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("MVLP_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def convergence_study(axis: str, resolutions: Sequence[int], fixed: RunConfig) -> list:
    """MV-vs-collocation L1 error while refining ``x`` or ``xi``.

    Independent resolutions run in worker processes when ``MVLP_THREADS``
    allows more than one.
    """
    if axis not in ("x", "xi"):
        raise ValueError(f"axis must be 'x' or 'xi', got {axis!r}")
    res = [int(n) for n in resolutions]
    if not res:
        raise ValueError("need at least one resolution")
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ValueError(f"resolutions must be strictly increasing, got {res}")
    key = "n_x" if axis == "x" else "n_xi"
    configs = [replace(fixed, **{key: n}) for n in res]
    workers = min(worker_count(), len(configs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_study_case, configs))
    else:
        errors = [_study_case(c) for c in configs]
    return convergence_rates(res, errors)


def compare_entropies(config: RunConfig, entropies: Iterable[str]) -> dict:
    """Run the ``mv`` scheme once per entropy; returns ``label -> (prepared, result)``."""
    out = {}
    for name in entropies:
        ent = parse_entropy(name)
        cfg = replace(config, entropy=name, scheme="mv")
        p = prepare(cfg)
        if p.scenario.model.n != 1:
            raise ValueError("entropy comparison is for scalar scenarios")
        res = evolve(p.initial, p.scenario.model, p.sgrid, p.rgrid, p.closure_cfg, p.grid,
                     p.t_final, ("mv",), p.cfl_rule, cfg.cfl)
        out[ent.label] = (p, res)
    return out


# ---------------------------------------------------------------------------
# CSV output


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.16e}"


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_field_csv(path, fld: MomentField, sgrid: SpatialGrid, rgrid: RandomGrid) -> Path:
    with _open(path) as fh:
        fh.write("x,xi,component,value\n")
        for j, x in enumerate(sgrid.centers):
            for i, xi in enumerate(rgrid.centers):
                for c in range(fld.n):
                    fh.write(f"{_fmt(x)},{_fmt(xi)},{c},{_fmt(fld.values[i, j, c])}\n")
    return Path(path)


def write_measure_csv(path, state: ClosureState, sgrid: SpatialGrid, rgrid: RandomGrid,
                      threshold: float = 1e-12) -> Path:
    grid = state.grid
    pts = grid.points
    cols = ",".join(f"u{d + 1}" for d in range(grid.n))
    with _open(path) as fh:
        fh.write(f"x,xi,{cols},weight\n")
        for j, x in enumerate(sgrid.centers):
            for i, xi in enumerate(rgrid.centers):
                w = state.probs[state.index[i, j + 1]] / grid.du
                for ell in np.flatnonzero(w > threshold):
                    us = ",".join(_fmt(u) for u in pts[ell])
                    fh.write(f"{_fmt(x)},{_fmt(xi)},{us},{_fmt(w[ell])}\n")
    return Path(path)


def write_trace_csv(path, trace: Sequence[TraceRow]) -> Path:
    with _open(path) as fh:
        fh.write("step,t,dt,total_entropy,wall_ms\n")
        for r in trace:
            fh.write(f"{r.step},{_fmt(r.t)},{_fmt(r.dt)},{_fmt(r.total_entropy)},{_fmt(r.wall_ms)}\n")
    return Path(path)


def write_table_csv(path, rows: Sequence[ConvergenceRow]) -> Path:
    with _open(path) as fh:
        fh.write("N,error,rate\n")
        for r in rows:
            rate = "" if r.rate is None else _fmt(r.rate)
            fh.write(f"{r.n},{_fmt(r.error)},{rate}\n")
    return Path(path)


def read_table_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            ConvergenceRow(int(r["N"]), float(r["error"]), float(r["rate"]) if r["rate"] else None)
            for r in reader
        ]


def emit_outputs(prepared: Prepared, result: RunResult, config: RunConfig,
                 prefix: str = "") -> list:
    """Write the files selected by ``config.emit`` into ``config.out``."""
    if not config.emit:
        return []
    if config.out is None:
        raise ValueError("emit flags given but no output directory")
    out = Path(config.out)
    written = []
    if "field_csv" in config.emit:
        for name, fld in result.fields.items():
            written.append(write_field_csv(out / f"{prefix}field_{name}.csv", fld,
                                           prepared.sgrid, prepared.rgrid))
    if "measure_csv" in config.emit and result.final_state is not None:
        written.append(write_measure_csv(out / f"{prefix}measure.csv", result.final_state,
                                         prepared.sgrid, prepared.rgrid))
    if "trace_csv" in config.emit:
        written.append(write_trace_csv(out / f"{prefix}trace.csv", result.trace))
    return written
