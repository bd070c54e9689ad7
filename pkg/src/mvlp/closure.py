"""Entropy-minimizing Young-measure closure on a discretized phase space.

For a moment ``m`` (the conditional mean of the state over one random
cell) the closure solves::

    minimize    du * sum_l eta(u_l) w_l
    subject to  0 <= w_l <= lambda_F / du
                du * sum_l w_l = 1
                du * sum_l u_l w_l = m        (or within +-du per component)

and evaluates expectations of the flux, wave speed and entropy under the
resulting discrete measure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lp import LPProblem, LPStatus, SolverOptions, solve_lp, solve_lp_batch
from .models import Entropy, ModelSpec

__all__ = [
    "PhaseGrid",
    "ClosureConfig",
    "ClosureInfeasible",
    "YoungMeasureSlice",
    "Closure",
    "solve_closure",
    "closure_flux",
    "expected_speed",
    "measure_entropy",
    "solve_joint_closure",
    "closure_problem",
]

# bytes per batch chunk is roughly 8 * chunk * (L + rows) * a few arrays
_CHUNK_ENTRIES = 2_000_000


class ClosureInfeasible(RuntimeError):
    """No admissible measure reproduces the requested moment."""

    def __init__(self, message, moment=None, cell=None, status=None):
        super().__init__(message)
        self.moment = moment
        self.cell = cell
        self.status = status


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor-product grid of cell centers on the phase box.

    ``points`` has shape ``(L, n)`` with the first state component varying
    slowest.
    """

    lo: tuple
    hi: tuple
    counts: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        counts = tuple(int(v) for v in np.atleast_1d(self.counts))
        if len(counts) == 1 and len(lo) > 1:
            counts = counts * len(lo)
        if not (len(lo) == len(hi) == len(counts)):
            raise ValueError("phase grid bounds and counts disagree in dimension")
        if any(h <= l for l, h in zip(lo, hi)) or any(c < 1 for c in counts):
            raise ValueError("phase grid needs hi > lo and at least one cell per dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def for_model(cls, model: ModelSpec, n_u: int) -> "PhaseGrid":
        return cls(model.phase_lo, model.phase_hi, (n_u,) * model.n)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.counts)

    @property
    def du(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axis(self, d: int) -> np.ndarray:
        h = self.spacing[d]
        return self.lo[d] + (np.arange(self.counts[d]) + 0.5) * h

    @property
    def points(self) -> np.ndarray:
        axes = np.meshgrid(*[self.axis(d) for d in range(self.n)], indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=-1)


@dataclass(frozen=True)
class ClosureConfig:
    lambda_f: float = 1.0
    relax_band: bool = False
    entropy: Optional[Entropy] = None

    def __post_init__(self):
        if not (0.0 < self.lambda_f <= 1.0):
            raise ValueError(f"lambda_F must lie in (0, 1], got {self.lambda_f}")

    def entropy_for(self, model: ModelSpec) -> Entropy:
        return self.entropy if self.entropy is not None else model.default_entropy


@dataclass
class YoungMeasureSlice:
    weights: np.ndarray
    grid: PhaseGrid
    objective: float = float("nan")

    @property
    def mean(self) -> np.ndarray:
        return self.grid.du * self.weights @ self.grid.points

    def support(self, tol: float = 1e-9) -> np.ndarray:
        return np.flatnonzero(self.weights > tol)


def closure_problem(moment, model: ModelSpec, grid: PhaseGrid, cfg: ClosureConfig) -> LPProblem:
    """The per-moment LP in weight units, as an :class:`LPProblem`."""
    c = Closure(model, grid, cfg)
    lo, hi = c.row_targets(np.atleast_2d(np.asarray(moment, dtype=float)))
    return LPProblem(
        cost=c.cost_prob * grid.du,
        lower=np.zeros(grid.size),
        upper=np.full(grid.size, cfg.lambda_f / grid.du),
        eq_matrix=c.rows_prob * grid.du,
        eq_lo=lo[0],
        eq_hi=hi[0],
    )


class Closure:
    """Closure LPs for one ``(model, grid, config)`` triple.

    Internally the LP is solved for the cell probabilities ``p = du * w``,
    which has the same vertices, objective and pivot sequence as the weight
    form but better scaling when ``du`` is small.
    """

    def __init__(self, model: ModelSpec, grid: PhaseGrid, cfg: ClosureConfig,
                 opts: SolverOptions = SolverOptions()):
        if grid.n != model.n:
            raise ValueError(f"phase grid has dimension {grid.n}, model needs {model.n}")
        self.model = model
        self.grid = grid
        self.cfg = cfg
        self.opts = opts
        self.entropy = cfg.entropy_for(model)
        self.entropy.check_box(grid.lo, grid.hi)
        L = grid.size
        if cfg.lambda_f * L < 1.0 - opts.tol_feas:
            raise ValueError(
                f"lambda_F={cfg.lambda_f} with {L} phase cells cannot hold unit mass"
            )
        self.points = grid.points
        self.cost_prob = self.entropy(self.points)
        self.rows_prob = np.vstack([np.ones(L), self.points.T])
        self.upper_prob = np.full(L, cfg.lambda_f)
        self.speeds = model.spectral_radius(self.points)
        self._flux_cache: dict = {}

    def row_targets(self, moments):
        K = moments.shape[0]
        ones = np.ones((K, 1))
        if self.cfg.relax_band:
            h = self.grid.spacing[None, :]
            return np.hstack([ones, moments - h]), np.hstack([ones, moments + h])
        return np.hstack([ones, moments]), np.hstack([ones, moments])

    def flux_table(self, x: float) -> np.ndarray:
        if not self.model.x_dependent:
            x = 0.0
        key = float(x)
        tab = self._flux_cache.get(key)
        if tab is None:
            tab = self.model.flux(self.points, np.full(self.grid.size, key))
            self._flux_cache[key] = tab
        return tab

    def solve_probabilities(self, moments, cells: Optional[Sequence] = None):
        """Cell probabilities ``(K, L)`` and objectives for a batch of moments.

        Identical moments (after rounding to 12 decimals) share one solve.
        Raises :class:`ClosureInfeasible` naming the first failing entry.
        """
        moments = np.asarray(moments, dtype=float).reshape(-1, self.model.n)
        if not np.all(np.isfinite(moments)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(moments), axis=1))[0])
            raise ClosureInfeasible(
                f"non-finite moment at {_cell_label(cells, bad)}",
                moment=moments[bad], cell=_cell_label(cells, bad),
            )
        _, first, inverse = np.unique(
            np.round(moments, 12), axis=0, return_index=True, return_inverse=True
        )
        inverse = inverse.ravel()
        uniq = moments[first]
        P, obj = self._solve_unique(uniq, cells, first)
        return P, obj, inverse

    def _solve_unique(self, uniq, cells, first):
        K = uniq.shape[0]
        L = self.grid.size
        chunk = max(1, _CHUNK_ENTRIES // (L + self.model.n + 1))
        P = np.empty((K, L))
        obj = np.empty(K)
        for s in range(0, K, chunk):
            m = uniq[s:s + chunk]
            lo, hi = self.row_targets(m)
            sol = solve_lp_batch(
                self.cost_prob, np.zeros(L), self.upper_prob, self.rows_prob, lo, hi, self.opts
            )
            failed = np.flatnonzero(sol.status != LPStatus.OPTIMAL)
            if failed.size:
                k = int(failed[0])
                status = LPStatus(int(sol.status[k]))
                label = _cell_label(cells, int(first[s + k]))
                raise ClosureInfeasible(
                    f"closure LP {status.name.lower()} for moment {m[k].tolist()} at {label}",
                    moment=m[k], cell=label, status=status,
                )
            P[s:s + chunk] = np.clip(sol.x, 0.0, None)
            obj[s:s + chunk] = sol.objective
        return P, obj

    def slices(self, moments) -> list:
        P, obj, inv = self.solve_probabilities(moments)
        du = self.grid.du
        return [YoungMeasureSlice(P[k] / du, self.grid, float(obj[k])) for k in inv]


def _cell_label(cells, k):
    if cells is None:
        return f"entry {k}"
    return f"cell {cells[k]}"


# ---------------------------------------------------------------------------
# single-slice API


def solve_closure(moment, model: ModelSpec, grid: PhaseGrid, cfg: ClosureConfig,
                  opts: SolverOptions = SolverOptions()) -> YoungMeasureSlice:
    """Entropy-minimizing discrete measure with the given mean."""
    closure = Closure(model, grid, cfg, opts)
    return closure.slices(np.atleast_2d(np.asarray(moment, dtype=float)))[0]


def closure_flux(slice_: YoungMeasureSlice, model: ModelSpec, x: float = 0.0) -> np.ndarray:
    pts = slice_.grid.points
    f = model.flux(pts, np.full(len(pts), float(x)))
    return slice_.grid.du * slice_.weights @ f


def expected_speed(slice_: YoungMeasureSlice, model: ModelSpec) -> float:
    return float(slice_.grid.du * slice_.weights @ model.spectral_radius(slice_.grid.points))


def measure_entropy(slice_: YoungMeasureSlice, entropy: Entropy) -> float:
    return float(slice_.grid.du * slice_.weights @ entropy(slice_.grid.points))


def solve_joint_closure(moments, model: ModelSpec, grid: PhaseGrid, cfg: ClosureConfig,
                        p0: float = 0.5, dxi: Optional[float] = None,
                        opts: SolverOptions = SolverOptions()):
    """Solve the coupled LP over all random cells at once.

    Returns ``(slices, objective)`` where ``objective`` is the joint cost
    ``p0 * dxi * du * sum_i sum_l eta(u_l) mu_{i,l}``.  ``dxi`` defaults to
    the width of ``[-1, 1]`` split into ``len(moments)`` cells.
    """
    moments = np.asarray(moments, dtype=float).reshape(-1, model.n)
    n_xi = moments.shape[0]
    if dxi is None:
        dxi = 2.0 / n_xi
    closure = Closure(model, grid, cfg, opts)
    L = grid.size
    du = grid.du
    R1 = closure.rows_prob.shape[0]

    blocks = [closure.rows_prob * du] * n_xi
    A = np.zeros((R1 * n_xi, L * n_xi))
    for i, blk in enumerate(blocks):
        A[i * R1:(i + 1) * R1, i * L:(i + 1) * L] = blk
    lo, hi = closure.row_targets(moments)
    problem = LPProblem(
        cost=np.tile(p0 * dxi * du * closure.cost_prob, n_xi),
        lower=np.zeros(L * n_xi),
        upper=np.full(L * n_xi, cfg.lambda_f / du),
        eq_matrix=A,
        eq_lo=lo.ravel(),
        eq_hi=hi.ravel(),
    )
    sol = solve_lp(problem, opts)
    if not sol.optimal:
        raise ClosureInfeasible(
            f"joint closure LP {sol.status.name.lower()}", moment=moments, status=sol.status
        )
    w = np.clip(sol.x, 0.0, None).reshape(n_xi, L)
    slices = [
        YoungMeasureSlice(w[i], grid, float(du * closure.cost_prob @ w[i])) for i in range(n_xi)
    ]
    return slices, sol.objective
