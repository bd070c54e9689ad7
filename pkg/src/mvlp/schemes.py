"""Lax-Friedrichs time stepping for the measure closure and for collocation.

Both schemes use the same two-point stencil::

    u_j^{n+1} = (u_{j+1} + u_{j-1}) / 2 - dt / (2 dx) * (F_{j+1} - F_{j-1})

and differ only in how ``F`` is obtained: from the closure measure of the
neighbouring moment (``mv``) or from the exact flux at the point value
(``collocation``).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .closure import Closure, ClosureConfig, ClosureInfeasible, PhaseGrid, YoungMeasureSlice
from .grids import MomentField, RandomGrid, SpatialGrid
from .models import ModelSpec

__all__ = [
    "SCHEMES",
    "CFL_RULES",
    "ClosureState",
    "TraceRow",
    "RunResult",
    "evaluate_closure",
    "mv_step",
    "collocation_step",
    "dt_global",
    "dt_measure",
    "evolve",
    "run",
]

log = logging.getLogger(__name__)

SCHEMES = ("mv", "collocation")
CFL_RULES = ("global", "per-step", "measure")
_SPEED_FLOOR = 1e-12


@dataclass
class ClosureState:
    """Closure evaluated on a padded field (ghost cells included)."""

    flux: np.ndarray  # (n_xi, n_x + 2, n)
    speed: np.ndarray  # (n_xi, n_x) expected spectral radius per interior cell
    entropy: np.ndarray  # (n_xi, n_x) measure entropy per interior cell
    probs: np.ndarray  # (K, L) unique cell probabilities
    index: np.ndarray  # (n_xi, n_x + 2) -> row of ``probs``
    grid: PhaseGrid

    def slice_at(self, i: int, j: int) -> YoungMeasureSlice:
        """Measure of interior cell ``(i, j)``."""
        k = self.index[i, j + 1]
        return YoungMeasureSlice(self.probs[k] / self.grid.du, self.grid)


def evaluate_closure(closure: Closure, values: np.ndarray, sgrid: SpatialGrid) -> ClosureState:
    """Solve the closure for every cell of ``values`` plus ghost cells."""
    padded = sgrid.pad(values)
    n_xi, n_cols, n = padded.shape
    cells = [(i, j - 1) for i in range(n_xi) for j in range(n_cols)]
    try:
        P, obj, inv = closure.solve_probabilities(padded.reshape(-1, n), cells)
    except ClosureInfeasible as exc:
        raise ClosureInfeasible(f"{exc} (cell is (i, j); j=-1/n_x are ghosts)",
                                exc.moment, exc.cell, exc.status) from exc
    index = inv.reshape(n_xi, n_cols)

    xs = sgrid.ghost_centers
    if closure.model.x_dependent:
        flux = np.empty((n_xi, n_cols, n))
        for j, x in enumerate(xs):
            flux[:, j] = P[index[:, j]] @ closure.flux_table(x)
    else:
        flux = (P @ closure.flux_table(0.0))[index]
    speed = (P @ closure.speeds)[index[:, 1:-1]]
    entropy = obj[index[:, 1:-1]]
    return ClosureState(flux, speed, entropy, P, index, closure.grid)


def _lf_update(padded, flux, dt, dx):
    return 0.5 * (padded[:, 2:] + padded[:, :-2]) - dt / (2.0 * dx) * (flux[:, 2:] - flux[:, :-2])


def mv_step(field: MomentField, model: ModelSpec, sgrid: SpatialGrid, rgrid: RandomGrid,
            cfg: ClosureConfig, dt: float, grid: Optional[PhaseGrid] = None,
            closure: Optional[Closure] = None, state: Optional[ClosureState] = None) -> MomentField:
    """One step of the measure-closure scheme.

    Pass ``closure`` to reuse a prepared closure, ``state`` to reuse an
    already evaluated one for this very field.
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if closure is None:
        if grid is None:
            raise ValueError("need a phase grid or a prepared closure")
        closure = Closure(model, grid, cfg)
    if state is None:
        state = evaluate_closure(closure, field.values, sgrid)
    new = _lf_update(sgrid.pad(field.values), state.flux, dt, sgrid.dx)
    return MomentField(new, field.time + dt)


def collocation_step(field: MomentField, model: ModelSpec, sgrid: SpatialGrid,
                     rgrid: RandomGrid, dt: float) -> MomentField:
    """One step of the collocation reference scheme with the exact flux."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    padded = sgrid.pad(field.values)
    xs = np.broadcast_to(sgrid.ghost_centers, padded.shape[:2])
    flux = model.flux(padded, xs)
    new = _lf_update(padded, flux, dt, sgrid.dx)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError(f"collocation step produced non-finite values at t={field.time}")
    return MomentField(new, field.time + dt)


def _check_cfl(cfl):
    if not (0.0 < cfl <= 1.0):
        raise ValueError(f"CFL number must lie in (0, 1], got {cfl}")


def _dt_from_speed(speed, dx, cfl):
    if not np.isfinite(speed):
        raise FloatingPointError("non-finite wave speed")
    if speed <= 0.0:
        log.warning("maximal wave speed is zero; flooring it at %g", _SPEED_FLOOR)
        speed = _SPEED_FLOOR
    return cfl * dx / speed


def dt_global(field: MomentField, model: ModelSpec, sgrid: SpatialGrid, cfl: float) -> float:
    """``cfl * dx / max spectral radius`` over all samples of ``field``."""
    _check_cfl(cfl)
    speed = float(np.max(model.spectral_radius(field.values)))
    return _dt_from_speed(speed, sgrid.dx, cfl)


def dt_measure(speeds: np.ndarray, sgrid: SpatialGrid, rgrid: RandomGrid, cfl: float) -> float:
    """Time step from expected speeds of the closure measures.

    ``speeds[i, j]`` is the expected spectral radius of the measure in
    cell ``(i, j)``; the bracket is the xi-quadrature ``dxi * p0 * sum_i``.
    """
    _check_cfl(cfl)
    bracket = rgrid.dxi * rgrid.p0 * np.sum(np.asarray(speeds), axis=0)
    return _dt_from_speed(float(np.max(bracket)), sgrid.dx, cfl)


@dataclass
class TraceRow:
    step: int
    t: float
    dt: float
    total_entropy: float
    wall_ms: float


@dataclass
class RunResult:
    fields: dict  # scheme name -> MomentField
    trace: list = field(default_factory=list)
    final_state: Optional[ClosureState] = None

    @property
    def mv(self) -> MomentField:
        return self.fields["mv"]

    @property
    def collocation(self) -> MomentField:
        return self.fields["collocation"]


def evolve(initial: MomentField, model: ModelSpec, sgrid: SpatialGrid, rgrid: RandomGrid,
           cfg: ClosureConfig, grid: Optional[PhaseGrid], t_final: float,
           schemes: Sequence[str] = ("mv", "collocation"), cfl_rule: str = "global",
           cfl: float = 0.75, final_measures: bool = True) -> RunResult:
    """Advance one or both schemes to ``t_final`` on a shared time-step sequence.

    With ``per-step`` the step comes from the largest point speed over all
    fields being advanced; ``measure`` needs the ``mv`` scheme.
    """
    if not t_final > 0:
        raise ValueError(f"final time must be positive, got {t_final}")
    schemes = tuple(schemes)
    unknown = set(schemes) - set(SCHEMES)
    if unknown or not schemes:
        raise ValueError(f"schemes must be drawn from {SCHEMES}, got {schemes}")
    if cfl_rule not in CFL_RULES:
        raise ValueError(f"cfl rule must be one of {CFL_RULES}, got {cfl_rule!r}")
    if cfl_rule == "measure" and "mv" not in schemes:
        raise ValueError("the measure CFL rule needs the mv scheme")
    _check_cfl(cfl)

    closure = Closure(model, grid, cfg) if "mv" in schemes else None
    fields = {name: initial.copy() for name in schemes}
    dt_frozen = dt_global(initial, model, sgrid, cfl) if cfl_rule == "global" else None
    trace = []
    t = initial.time
    step = 0
    eps = 1e-12 * max(1.0, abs(t_final))
    while t < t_final - eps:
        tick = time.perf_counter()
        state = evaluate_closure(closure, fields["mv"].values, sgrid) if closure else None
        if cfl_rule == "global":
            dt = dt_frozen
        elif cfl_rule == "per-step":
            dt = min(dt_global(f, model, sgrid, cfl) for f in fields.values())
        else:
            dt = dt_measure(state.speed, sgrid, rgrid, cfl)
        if t + dt >= t_final - eps:
            dt = t_final - t
        for name in schemes:
            if name == "mv":
                fields[name] = mv_step(fields[name], model, sgrid, rgrid, cfg, dt,
                                       closure=closure, state=state)
            else:
                fields[name] = collocation_step(fields[name], model, sgrid, rgrid, dt)
        t = t + dt
        for f in fields.values():
            f.time = t
        total_entropy = (
            float(rgrid.p0 * rgrid.dxi * np.sum(state.entropy)) if state is not None else float("nan")
        )
        trace.append(TraceRow(step, t, dt, total_entropy,
                              1e3 * (time.perf_counter() - tick)))
        step += 1
    for f in fields.values():
        f.time = t_final

    final_state = None
    if closure is not None and final_measures:
        final_state = evaluate_closure(closure, fields["mv"].values, sgrid)
    return RunResult(fields, trace, final_state)


def run(initial: MomentField, model: ModelSpec, sgrid: SpatialGrid, rgrid: RandomGrid,
        cfg: ClosureConfig, grid: Optional[PhaseGrid], t_final: float, scheme: str = "mv",
        cfl_rule: str = "global", cfl: float = 0.75):
    """Single-scheme run; returns ``(field, trace)``."""
    res = evolve(initial, model, sgrid, rgrid, cfg, grid, t_final, (scheme,), cfl_rule, cfl,
                 final_measures=False)
    return res.fields[scheme], res.trace
