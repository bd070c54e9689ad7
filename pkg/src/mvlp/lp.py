"""Small dense linear programs with box bounds and interval rows.

Problems have the form::

    minimize    cost @ x
    subject to  lower <= x <= upper
                eq_lo <= eq_matrix @ x <= eq_hi

Rows are handled through one slack per row, ``A x - s = 0`` with
``eq_lo <= s <= eq_hi``, so an equality row is simply a slack with a
zero-width box.

Two solvers share that formulation:

* :func:`solve_lp` -- bounded-variable revised primal simplex with a
  Phase-1/Phase-2 structure and Bland's rule.  Works for any bounds.
* :func:`solve_lp_batch` -- bounded dual simplex vectorized over many
  problems that share cost, matrix and variable bounds but differ in the
  row targets.  Requires finite variable bounds (then the all-slack basis
  is dual feasible and no Phase 1 is needed).  This is what the closure
  uses inside the time loop.

Both are deterministic: ties are broken by lowest variable index and no
randomness or threading is involved.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "LPProblem",
    "LPSolution",
    "LPStatus",
    "SolverOptions",
    "BatchLPSolution",
    "check_kkt",
    "check_kkt_batch",
    "solve_lp",
    "solve_lp_batch",
]

_PIVOT_TOL = 1e-11


class LPStatus(enum.IntEnum):
    OPTIMAL = 0
    INFEASIBLE = 1
    UNBOUNDED = 2
    ITERATION_LIMIT = 3


@dataclass(frozen=True)
class SolverOptions:
    tol_feas: float = 1e-9
    tol_gap: float = 1e-9
    # None means 10 * (V + R)
    max_iter: Optional[int] = None

    def iteration_cap(self, n_vars: int, n_rows: int) -> int:
        if self.max_iter is not None:
            return int(self.max_iter)
        return 10 * (n_vars + n_rows)


@dataclass
class LPProblem:
    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq_matrix: np.ndarray
    eq_lo: np.ndarray
    eq_hi: np.ndarray

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).ravel()
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.eq_matrix = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float))
        self.eq_lo = np.asarray(self.eq_lo, dtype=float).ravel()
        self.eq_hi = np.asarray(self.eq_hi, dtype=float).ravel()

        n_rows, n_vars = self.eq_matrix.shape
        if n_vars < 1 or n_rows < 1:
            raise ValueError("need at least one variable and one row")
        for name, vec, size in (
            ("cost", self.cost, n_vars),
            ("lower", self.lower, n_vars),
            ("upper", self.upper, n_vars),
            ("eq_lo", self.eq_lo, n_rows),
            ("eq_hi", self.eq_hi, n_rows),
        ):
            if vec.shape != (size,):
                raise ValueError(f"{name} has shape {vec.shape}, expected ({size},)")
        finite = [self.cost, self.eq_matrix, self.eq_lo, self.eq_hi]
        if not all(np.all(np.isfinite(a)) for a in finite):
            raise ValueError("cost, rows and row targets must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("lower > upper for some variable")
        if np.any(self.eq_lo > self.eq_hi):
            raise ValueError("eq_lo > eq_hi for some row")

    @property
    def n_vars(self) -> int:
        return self.eq_matrix.shape[1]

    @property
    def n_rows(self) -> int:
        return self.eq_matrix.shape[0]


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    status: LPStatus
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    complementarity: float = np.inf
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


# ---------------------------------------------------------------------------
# KKT certification


def check_kkt(problem: LPProblem, x, duals, active_tol: float = 1e-9):
    """Max-norm KKT violations ``(primal, dual, complementarity)`` of ``(x, duals)``.

    ``duals`` are the row multipliers ``y``; variable multipliers are the
    reduced costs ``d = cost - A^T y``.  A reduced cost (or row multiplier)
    must be nonnegative when only the lower side is active, nonpositive
    when only the upper side is active, and zero when neither is.
    """
    x = np.asarray(x, dtype=float)
    duals = np.asarray(duals, dtype=float)
    if x.shape != (problem.n_vars,) or duals.shape != (problem.n_rows,):
        raise ValueError(
            f"dimension mismatch: x {x.shape}, duals {duals.shape} for "
            f"{problem.n_rows}x{problem.n_vars} problem"
        )
    res = check_kkt_batch(
        problem.cost,
        problem.lower,
        problem.upper,
        problem.eq_matrix,
        problem.eq_lo[None, :],
        problem.eq_hi[None, :],
        x[None, :],
        duals[None, :],
        active_tol=active_tol,
    )
    return tuple(float(r[0]) for r in res)


def _sign_violation(mult, at_lo, at_hi):
    # multiplier sign rules per side activity; fixed entries are unconstrained
    only_lo = at_lo & ~at_hi
    only_hi = at_hi & ~at_lo
    inside = ~at_lo & ~at_hi
    v = np.zeros_like(mult)
    v = np.where(only_lo, np.maximum(-mult, 0.0), v)
    v = np.where(only_hi, np.maximum(mult, 0.0), v)
    v = np.where(inside, np.abs(mult), v)
    return v


def _gap(mult, dist_lo, dist_hi):
    pos = np.maximum(mult, 0.0)
    neg = np.maximum(-mult, 0.0)
    with np.errstate(invalid="ignore"):
        g_lo = np.where(pos > 0, pos * dist_lo, 0.0)
        g_hi = np.where(neg > 0, neg * dist_hi, 0.0)
    g = np.where(np.isfinite(g_lo), g_lo, 0.0) + np.where(np.isfinite(g_hi), g_hi, 0.0)
    return g


def check_kkt_batch(cost, lower, upper, A, row_lo, row_hi, X, Y, active_tol=1e-9):
    """Vectorized :func:`check_kkt` over a batch of problems sharing ``A``.

    ``row_lo``/``row_hi`` are ``(K, R)``, ``X`` is ``(K, V)``, ``Y`` is ``(K, R)``.
    Returns three arrays of length ``K``.
    """
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    Ax = X @ A.T
    primal = np.maximum.reduce(
        [
            np.max(np.maximum(row_lo - Ax, 0.0), axis=1),
            np.max(np.maximum(Ax - row_hi, 0.0), axis=1),
            np.max(np.maximum(lower - X, 0.0), axis=1),
            np.max(np.maximum(X - upper, 0.0), axis=1),
        ]
    )

    d = cost[None, :] - Y @ A
    x_lo = np.abs(X - lower) <= active_tol
    x_hi = np.abs(upper - X) <= active_tol
    r_lo = np.abs(Ax - row_lo) <= active_tol
    r_hi = np.abs(row_hi - Ax) <= active_tol
    dual = np.maximum(
        np.max(_sign_violation(d, x_lo, x_hi), axis=1),
        np.max(_sign_violation(Y, r_lo, r_hi), axis=1),
    )

    comp = np.maximum(
        np.max(_gap(d, X - lower, upper - X), axis=1),
        np.max(_gap(Y, Ax - row_lo, row_hi - Ax), axis=1),
    )
    return primal, dual, comp


# ---------------------------------------------------------------------------
# primal simplex


def _nonbasic_start(lo, hi):
    if np.isfinite(lo):
        return lo
    if np.isfinite(hi):
        return hi
    return 0.0


class _PrimalSimplex:
    """Bounded revised primal simplex on ``M z = 0``, ``lb <= z <= ub``.

    The basis matrix is refactorized at every pivot; the problems here are
    tiny and this keeps roundoff from accumulating.
    """

    def __init__(self, M, lb, ub, basis, z, max_iter, tol_feas):
        self.M = M
        self.lb = lb
        self.ub = ub
        self.basis = list(basis)
        self.z = z
        self.max_iter = max_iter
        self.tol_feas = tol_feas
        self.iterations = 0

    def basic_values(self):
        n = self.M.shape[1]
        nb = np.ones(n, dtype=bool)
        nb[self.basis] = False
        rhs = -self.M[:, nb] @ self.z[nb]
        B = self.M[:, self.basis]
        return np.linalg.solve(B, rhs)

    def duals(self, c):
        B = self.M[:, self.basis]
        return np.linalg.solve(B.T, c[self.basis])

    def run(self, c) -> LPStatus:
        n = self.M.shape[1]
        tol_d = 1e-12 * max(1.0, float(np.max(np.abs(c))))
        while True:
            self.z[self.basis] = self.basic_values()
            y = self.duals(c)
            d = c - self.M.T @ y
            is_basic = np.zeros(n, dtype=bool)
            is_basic[self.basis] = True
            can_up = (self.z < self.ub - self.tol_feas) | (self.ub == np.inf)
            can_dn = (self.z > self.lb + self.tol_feas) | (self.lb == -np.inf)
            fixed = self.lb == self.ub
            cand = ~is_basic & ~fixed & (((d < -tol_d) & can_up) | ((d > tol_d) & can_dn))
            if not np.any(cand):
                return LPStatus.OPTIMAL
            if self.iterations >= self.max_iter:
                return LPStatus.ITERATION_LIMIT
            self.iterations += 1

            j = int(np.flatnonzero(cand)[0])
            direction = 1.0 if d[j] < 0 else -1.0
            alpha = np.linalg.solve(self.M[:, self.basis], self.M[:, j])
            # basics move as -alpha * direction per unit step
            dxb = -alpha * direction
            xb = self.z[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]

            theta = np.full(len(self.basis), np.inf)
            hit_upper = np.zeros(len(self.basis), dtype=bool)
            dec = dxb < -_PIVOT_TOL
            inc = dxb > _PIVOT_TOL
            with np.errstate(invalid="ignore", divide="ignore"):
                theta[dec] = np.maximum((xb[dec] - lbb[dec]) / -dxb[dec], 0.0)
                theta[inc] = np.maximum((ubb[inc] - xb[inc]) / dxb[inc], 0.0)
            hit_upper[inc] = True
            theta = np.where(np.isnan(theta), np.inf, theta)
            flip = self.ub[j] - self.lb[j]

            best = np.min(theta) if theta.size else np.inf
            if not np.isfinite(best) and not np.isfinite(flip):
                return LPStatus.UNBOUNDED
            if flip <= best:
                self.z[j] = self.ub[j] if direction > 0 else self.lb[j]
                continue
            ties = np.flatnonzero(theta == best)
            # Bland: among tied leaving candidates take the lowest variable index
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            leaving = self.basis[r]
            self.z[j] = self.z[j] + direction * best
            self.z[leaving] = ubb[r] if hit_upper[r] else lbb[r]
            self.basis[r] = j


def solve_lp(problem: LPProblem, opts: SolverOptions = SolverOptions()) -> LPSolution:
    """Solve ``problem`` with a Phase-1/Phase-2 bounded revised simplex."""
    A = problem.eq_matrix
    R, V = A.shape
    cap = opts.iteration_cap(V, R)

    # z = [x (V), s (R), a (R)];  A x - s + diag(sigma) a = 0
    x0 = np.array([_nonbasic_start(l, u) for l, u in zip(problem.lower, problem.upper)])
    ax0 = A @ x0
    s0 = np.clip(ax0, problem.eq_lo, problem.eq_hi)
    need_art = np.abs(ax0 - s0) > 0
    sigma = np.where(s0 >= ax0, 1.0, -1.0)

    M = np.hstack([A, -np.eye(R), np.diag(sigma)])
    lb = np.concatenate([problem.lower, problem.eq_lo, np.zeros(R)])
    ub = np.concatenate([problem.upper, problem.eq_hi, np.where(need_art, np.inf, 0.0)])
    z = np.concatenate([x0, s0, np.abs(ax0 - s0)])
    basis = [V + R + r if need_art[r] else V + r for r in range(R)]

    sx = _PrimalSimplex(M, lb, ub, basis, z, cap, opts.tol_feas)
    if np.any(need_art):
        c1 = np.concatenate([np.zeros(V + R), np.ones(R)])
        status = sx.run(c1)
        if status is LPStatus.ITERATION_LIMIT:
            return _finish(problem, sx, status, opts)
        infeas = float(np.sum(sx.z[V + R:]))
        if infeas > opts.tol_feas:
            return _finish(problem, sx, LPStatus.INFEASIBLE, opts)
    # phase 2: artificials frozen at zero
    sx.ub[V + R:] = 0.0
    sx.z[V + R:] = np.where(np.isin(np.arange(V + R, V + 2 * R), sx.basis), sx.z[V + R:], 0.0)
    c2 = np.concatenate([problem.cost, np.zeros(2 * R)])
    status = sx.run(c2)
    return _finish(problem, sx, status, opts)


def _finish(problem, sx, status, opts) -> LPSolution:
    V = problem.n_vars
    R = problem.n_rows
    sx.z[sx.basis] = sx.basic_values()
    x = sx.z[:V].copy()
    c = np.concatenate([problem.cost, np.zeros(2 * R)])
    y = sx.duals(c)
    objective = float(problem.cost @ x)
    p, d, g = check_kkt(problem, x, y, active_tol=opts.tol_feas)
    sol = LPSolution(
        x=x,
        objective=objective,
        status=status,
        primal_residual=p,
        dual_residual=d,
        complementarity=g,
        duals=y,
        iterations=sx.iterations,
    )
    if status is LPStatus.OPTIMAL and (p > opts.tol_feas or d > opts.tol_feas or g > opts.tol_gap):
        # roundoff pushed the vertex outside tolerance; report honestly
        sol.status = LPStatus.ITERATION_LIMIT
    return sol


# ---------------------------------------------------------------------------
# batched dual simplex


@dataclass
class BatchLPSolution:
    x: np.ndarray  # (K, V)
    objective: np.ndarray  # (K,)
    status: np.ndarray  # (K,) of LPStatus codes
    primal_residual: np.ndarray
    dual_residual: np.ndarray
    complementarity: np.ndarray
    duals: np.ndarray  # (K, R)
    iterations: np.ndarray  # (K,)

    def __len__(self) -> int:
        return self.x.shape[0]

    def solution(self, k: int) -> LPSolution:
        return LPSolution(
            x=self.x[k].copy(),
            objective=float(self.objective[k]),
            status=LPStatus(int(self.status[k])),
            primal_residual=float(self.primal_residual[k]),
            dual_residual=float(self.dual_residual[k]),
            complementarity=float(self.complementarity[k]),
            duals=self.duals[k].copy(),
            iterations=int(self.iterations[k]),
        )


def solve_lp_batch(cost, lower, upper, eq_matrix, eq_lo, eq_hi,
                   opts: SolverOptions = SolverOptions()) -> BatchLPSolution:
    """Solve ``K`` problems that differ only in their row targets.

    ``cost``, ``lower``, ``upper`` have length ``V`` (bounds finite),
    ``eq_matrix`` is ``(R, V)`` and ``eq_lo``/``eq_hi`` are ``(K, R)``.
    Each problem runs a bounded dual simplex from the slack basis with
    Bland's rule, so the result for one row of ``eq_lo``/``eq_hi`` does not
    depend on the rest of the batch.
    """
    cost = np.asarray(cost, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    A = np.atleast_2d(np.asarray(eq_matrix, dtype=float))
    row_lo = np.atleast_2d(np.asarray(eq_lo, dtype=float))
    row_hi = np.atleast_2d(np.asarray(eq_hi, dtype=float))
    R, V = A.shape
    K = row_lo.shape[0]
    if row_lo.shape != (K, R) or row_hi.shape != (K, R):
        raise ValueError("row targets must have shape (K, R)")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("batched dual simplex needs finite variable bounds")
    if np.any(lower > upper) or np.any(row_lo > row_hi):
        raise ValueError("inconsistent bounds")

    n = V + R
    cap = opts.iteration_cap(V, R)
    M = np.hstack([A, -np.eye(R)])
    c = np.concatenate([cost, np.zeros(R)])
    lb = np.concatenate([np.broadcast_to(lower, (K, V)), row_lo], axis=1)
    ub = np.concatenate([np.broadcast_to(upper, (K, V)), row_hi], axis=1)
    fixed = lb == ub

    # slack basis: y = 0, reduced costs = cost; park x where that is dual feasible
    z = np.zeros((K, n))
    z[:, :V] = np.where(cost >= 0, lower, upper)
    basis = np.tile(np.arange(V, n), (K, 1))
    status = np.full(K, -1, dtype=int)
    iters = np.zeros(K, dtype=int)
    tol = opts.tol_feas

    active = np.arange(K)
    while active.size:
        bas = basis[active]
        Bmat = M[:, bas].transpose(1, 0, 2)  # (k, R, R)
        Binv = np.linalg.inv(Bmat)
        zz = z[active].copy()
        np.put_along_axis(zz, bas, 0.0, axis=1)
        xb = -np.einsum("kij,kj->ki", Binv, zz @ M.T)
        lbb = np.take_along_axis(lb[active], bas, axis=1)
        ubb = np.take_along_axis(ub[active], bas, axis=1)
        below = lbb - xb > tol
        above = xb - ubb > tol
        infeas = below | above

        done = ~np.any(infeas, axis=1)
        if np.any(done):
            idx = active[done]
            zi = z[idx]
            np.put_along_axis(zi, bas[done], xb[done], axis=1)
            z[idx] = zi
            status[idx] = LPStatus.OPTIMAL
        capped = ~done & (iters[active] >= cap)
        if np.any(capped):
            idx = active[capped]
            zi = z[idx]
            np.put_along_axis(zi, bas[capped], xb[capped], axis=1)
            z[idx] = zi
            status[idx] = LPStatus.ITERATION_LIMIT
        go = ~done & ~capped
        if not np.any(go):
            break
        active = active[go]
        bas, Binv, xb = bas[go], Binv[go], xb[go]
        below, above, infeas = below[go], above[go], infeas[go]
        lbb, ubb = lbb[go], ubb[go]
        k = active.size
        kk = np.arange(k)

        # Bland: leave with the lowest-index infeasible basic variable
        masked = np.where(infeas, bas, n + 1)
        r = np.argmin(masked, axis=1)
        to_lower = below[kk, r]

        y = np.einsum("ki,kij->kj", c[bas], Binv)
        d = c[None, :] - y @ M
        trow = Binv[kk, r, :] @ M  # (k, n): row r of B^-1 M

        zn = z[active]
        at_upper = (zn == ub[active]) & ~fixed[active]
        is_basic = np.zeros((k, n), dtype=bool)
        np.put_along_axis(is_basic, bas, True, axis=1)
        movable = ~is_basic & ~fixed[active]
        # x_Br = -sum_j T_rj z_j; raising it needs T_rj dz_j < 0
        sgn = np.where(to_lower, 1.0, -1.0)[:, None]
        eff = -trow * sgn  # > 0 means increasing z_j helps
        cand = movable & (((~at_upper) & (eff > _PIVOT_TOL)) | (at_upper & (eff < -_PIVOT_TOL)))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(cand, np.abs(d) / np.abs(trow), np.inf)
        j = np.argmin(ratio, axis=1)
        none = ~np.isfinite(ratio[kk, j])
        if np.any(none):
            idx = active[none]
            status[idx] = LPStatus.INFEASIBLE
            zi = z[idx]
            np.put_along_axis(zi, bas[none], xb[none], axis=1)
            z[idx] = zi
        ok = ~none
        idx = active[ok]
        leaving = bas[ok, r[ok]]
        new_val = np.where(to_lower[ok], lbb[ok, r[ok]], ubb[ok, r[ok]])
        z[idx, leaving] = new_val
        basis[idx, r[ok]] = j[ok]
        iters[idx] += 1
        active = idx

    X = z[:, :V].copy()
    objective = X @ cost
    Bmat = M[:, basis].transpose(1, 0, 2)
    Y = np.einsum("ki,kij->kj", c[basis], np.linalg.inv(Bmat))
    p, dres, g = check_kkt_batch(cost, lower, upper, A, row_lo, row_hi, X, Y, active_tol=tol)
    bad = (status == LPStatus.OPTIMAL) & ((p > tol) | (dres > tol) | (g > opts.tol_gap))
    status = np.where(bad, int(LPStatus.ITERATION_LIMIT), status)
    return BatchLPSolution(
        x=X,
        objective=objective,
        status=status,
        primal_residual=p,
        dual_residual=dres,
        complementarity=g,
        duals=Y,
        iterations=iters,
    )
