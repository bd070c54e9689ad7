"""Built-in initial data and their projection onto moment fields."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grids import MomentField, RandomGrid, SpatialGrid
from .models import (
    ModelSpec,
    burgers_model,
    discontinuous_flux_model,
    euler_model,
)

__all__ = [
    "Scenario",
    "builtin_scenarios",
    "get_scenario",
    "lax_curve",
    "project_initial",
]

GAMMA = 1.5
KAPPA = 1.0


def lax_curve(s, u_left, gamma: float = GAMMA, kappa: float = KAPPA) -> np.ndarray:
    """Point ``s`` on the 1-forward Lax curve through ``u_left = (rho_L, q_L)``.

    Shock branch for ``s >= rho_L``, rarefaction branch below.  Vectorized
    over ``s``; returns shape ``s.shape + (2,)``.
    """
    s = np.asarray(s, dtype=float)
    rho_l = float(u_left[0])
    if np.any(s <= 0) or rho_l <= 0:
        raise ValueError("Lax curve needs s > 0 and rho_L > 0")

    def p(r):
        return kappa * r**gamma

    shock = s >= rho_l
    radicand = np.where(shock, (s / rho_l) * (s - rho_l) * (p(s) - p(rho_l)), 0.0)
    q_shock = s * rho_l - np.sqrt(radicand)
    q_rare = s * rho_l - s * (np.log(s) - np.log(rho_l))
    q = np.where(shock, q_shock, q_rare)
    return np.stack([s, q], axis=-1)


@dataclass(frozen=True)
class Scenario:
    name: str
    u0: Callable  # (x, xi) arrays -> (..., n)
    model: ModelSpec
    x_lo: float
    x_hi: float
    n_x: int
    n_xi: int
    n_u: int
    t_final: float
    cfl_rule: str = "global"
    lambda_f: float = 1.0
    entropy: Optional[str] = None
    boundary: str = "free"
    xi_lo: float = -1.0
    xi_hi: float = 1.0
    description: str = field(default="", compare=False)

    def grids(self, n_x: Optional[int] = None, n_xi: Optional[int] = None,
              boundary: Optional[str] = None):
        sgrid = SpatialGrid(self.x_lo, self.x_hi, n_x or self.n_x, boundary or self.boundary)
        rgrid = RandomGrid(self.xi_lo, self.xi_hi, n_xi or self.n_xi)
        return sgrid, rgrid


def _gauss3():
    nodes = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
    weights = np.array([5.0, 8.0, 5.0]) / 9.0
    return nodes, weights


def project_initial(scenario: Scenario, sgrid: SpatialGrid, rgrid: RandomGrid,
                    exact: bool = False) -> MomentField:
    """Conditional means of the initial data over each ``(xi_i, x_j)`` cell.

    By default the data are sampled at cell centers; ``exact=True`` uses a
    3x3 Gauss rule per cell instead.
    """
    x = sgrid.centers
    xi = rgrid.centers
    if exact:
        nodes, w = _gauss3()
        xs = x[None, :, None, None] + 0.5 * sgrid.dx * nodes[None, None, :, None]
        xis = xi[:, None, None, None] + 0.5 * rgrid.dxi * nodes[None, None, None, :]
        xs, xis = np.broadcast_arrays(xs, xis)
        vals = np.asarray(scenario.u0(xs, xis), dtype=float)
        wts = 0.25 * w[:, None] * w[None, :]
        values = np.einsum("ijab...,ab->ij...", vals.reshape(vals.shape[:4] + (-1,)), wts)
    else:
        X, XI = np.meshgrid(x, xi)
        values = np.asarray(scenario.u0(X, XI), dtype=float)
    values = values.reshape(rgrid.n_xi, sgrid.n_x, scenario.model.n)

    lo = np.array(scenario.model.phase_lo)
    hi = np.array(scenario.model.phase_hi)
    outside = np.any((values < lo) | (values > hi), axis=-1)
    if np.any(outside):
        i, j = (int(v) for v in np.argwhere(outside)[0])
        raise ValueError(
            f"scenario {scenario.name}: initial value {values[i, j].tolist()} at cell "
            f"(i={i}, j={j}) lies outside the phase box {lo.tolist()}..{hi.tolist()}"
        )
    return MomentField(values, 0.0)


# ---------------------------------------------------------------------------
# initial data


def _step_xi(x, xi):
    x = np.asarray(x, dtype=float)
    return (((x >= 0.0) & (x <= 0.5)) * np.asarray(xi, dtype=float))[..., None]


def _sin_xi(x, xi):
    return (np.asarray(xi, dtype=float) * np.sin(2.0 * np.pi * np.asarray(x, dtype=float)))[..., None]


def _burgers_step(x, xi):
    x, _ = np.broadcast_arrays(np.asarray(x, dtype=float), xi)
    return np.where(x < 0.5, 1.5, 0.5)[..., None]


_U_LEFT = np.array([1.0, 1.0])


def _euler_riemann(x, xi):
    x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    # the curve parameter is the right density, s = xi/2 + rho_L
    right = lax_curve(0.5 * xi + _U_LEFT[0], _U_LEFT, GAMMA, KAPPA)
    return np.where((x < 0.0)[..., None], _U_LEFT, right)


def _dflux_step(x, xi):
    x, _ = np.broadcast_arrays(np.asarray(x, dtype=float), xi)
    return np.where(x < 0.0, 0.65, 0.35)[..., None]


def builtin_scenarios() -> list:
    return [
        Scenario(
            "burgers-step-xi", _step_xi, burgers_model(-5.0, 5.0),
            0.0, 1.0, n_x=100, n_xi=5, n_u=10, t_final=0.5,
            description="Burgers, u0 = xi on [0, 1/2], zero elsewhere",
        ),
        Scenario(
            "burgers-sin", _sin_xi, burgers_model(-5.0, 5.0),
            0.0, 1.0, n_x=100, n_xi=10, n_u=100, t_final=0.25,
            description="Burgers, u0 = xi sin(2 pi x)",
        ),
        Scenario(
            "burgers-nonatomic", _burgers_step, burgers_model(-2.0, 2.0),
            0.0, 1.0, n_x=100, n_xi=1, n_u=100, t_final=0.25, lambda_f=0.05,
            description="deterministic Burgers step 1.5/0.5 with capped measure weights",
        ),
        Scenario(
            "euler-riemann", _euler_riemann, euler_model(GAMMA, KAPPA, (0.05, -1.0), (2.5, 1.5)),
            -1.0, 1.0, n_x=100, n_xi=10, n_u=25, t_final=0.25, cfl_rule="per-step",
            description="isentropic Euler, random right state on the 1-Lax curve",
        ),
        Scenario(
            "dflux-step", _dflux_step, discontinuous_flux_model(-1.0, 1.0),
            -4.0, 4.0, n_x=100, n_xi=1, n_u=50, t_final=2.0, cfl_rule="per-step",
            entropy="quadratic",
            description="scalar law with flux jump at x = 0, step 0.65/0.35",
        ),
    ]


def get_scenario(name: str) -> Scenario:
    for sc in builtin_scenarios():
        if sc.name == name:
            return sc
    known = ", ".join(s.name for s in builtin_scenarios())
    raise ValueError(f"unknown scenario {name!r} (known: {known})")
