"""Entropy-minimizing Young-measure closures for conservation laws with random data.

The closure is a small linear program per cell, solved by a bundled bounded
simplex; a Lax-Friedrichs scheme advances the conditional means, and a
collocation run with the exact flux serves as reference.
"""
from .closure import (
    Closure,
    ClosureConfig,
    ClosureInfeasible,
    PhaseGrid,
    YoungMeasureSlice,
    closure_flux,
    expected_speed,
    measure_entropy,
    solve_closure,
    solve_joint_closure,
)
from .grids import MomentField, RandomGrid, SpatialGrid
from .harness import RunConfig, convergence_study, l1_error
from .lp import LPProblem, LPSolution, LPStatus, SolverOptions, check_kkt, solve_lp, solve_lp_batch
from .models import (
    Entropy,
    ModelSpec,
    burgers_model,
    discontinuous_flux_model,
    euler_model,
    kinetic_euler_entropy,
    parse_entropy,
    quadratic_entropy,
    shifted_abs_entropy,
    unit_entropy,
)
from .scenarios import Scenario, get_scenario, lax_curve, project_initial
from .schemes import collocation_step, dt_global, dt_measure, evolve, mv_step, run

__version__ = "0.1.0"
