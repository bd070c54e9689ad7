import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lp_oracle import enumerate_optimum
from mvlp.closure import (
    Closure,
    ClosureConfig,
    ClosureInfeasible,
    PhaseGrid,
    YoungMeasureSlice,
    closure_flux,
    closure_problem,
    expected_speed,
    measure_entropy,
    solve_closure,
    solve_joint_closure,
)
from mvlp.models import (
    burgers_model,
    euler_model,
    quadratic_entropy,
    shifted_abs_entropy,
    unit_entropy,
)

BURGERS = burgers_model()
GRID = PhaseGrid.for_model(BURGERS, 10)  # centers -4.5, -3.5, ..., 4.5
EQ = ClosureConfig()


def dirac(grid, point):
    k = int(np.argmin(np.sum((grid.points - np.atleast_1d(point)) ** 2, axis=1)))
    w = np.zeros(grid.size)
    w[k] = 1.0 / grid.du
    return YoungMeasureSlice(w, grid)


def two_point(grid, a, b):
    w = np.zeros(grid.size)
    for p in (a, b):
        k = int(np.argmin(np.abs(grid.points[:, 0] - p)))
        w[k] += 0.5 / grid.du
    return YoungMeasureSlice(w, grid)


def test_phase_grid():
    g = PhaseGrid((0.05, -1.0), (2.5, 1.5), 25)
    assert g.size == 625 and g.n == 2
    np.testing.assert_allclose(g.spacing, [0.098, 0.1])
    assert g.du == pytest.approx(0.0098)
    # first component varies slowest
    assert g.points[0, 0] == g.points[1, 0] and g.points[0, 1] < g.points[1, 1]
    with pytest.raises(ValueError):
        PhaseGrid((1.0,), (0.0,), 5)


def test_dirac_on_grid_point():
    s = solve_closure([1.5], BURGERS, GRID, EQ)
    k = int(np.argmin(np.abs(GRID.points[:, 0] - 1.5)))
    expected = np.zeros(GRID.size)
    expected[k] = 1.0 / GRID.du
    np.testing.assert_allclose(s.weights, expected, atol=1e-10)


def test_midpoint_splits_evenly():
    s = solve_closure([2.0], BURGERS, GRID, EQ)
    assert set(s.support()) == {6, 7}
    np.testing.assert_allclose(s.weights[[6, 7]], 0.5 / GRID.du, atol=1e-10)


def test_midpoint_split_matches_vertex_enumeration():
    # three-point neighbourhood {1.5, 2.5, 3.5} with the mean at 2.0
    u = np.array([1.5, 2.5, 3.5])
    val, x = enumerate_optimum(0.5 * u**2, np.zeros(3), np.ones(3), np.vstack([np.ones(3), u]),
                               np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    np.testing.assert_allclose(x, [0.5, 0.5, 0.0], atol=1e-12)
    s = solve_closure([2.0], BURGERS, GRID, EQ)
    assert measure_entropy(s, quadratic_entropy()) == pytest.approx(val, abs=1e-12)


def test_cap_forces_wide_support():
    model = burgers_model(-2.0, 2.0)
    grid = PhaseGrid.for_model(model, 100)
    cfg = ClosureConfig(lambda_f=0.05)
    c = Closure(model, grid, cfg)
    rng = np.random.default_rng(0)
    for sl in c.slices(rng.uniform(-1.0, 1.0, size=(50, 1))):
        assert sl.support(1e-9).size >= 20
        assert sl.weights.max() <= 0.05 / grid.du + 1e-9


def test_cap_too_small_for_grid():
    with pytest.raises(ValueError):
        Closure(BURGERS, PhaseGrid.for_model(BURGERS, 10), ClosureConfig(lambda_f=0.05))
    with pytest.raises(ValueError):
        ClosureConfig(lambda_f=1.5)
    with pytest.raises(ValueError):
        ClosureConfig(lambda_f=0.0)


def test_infeasible_moment():
    with pytest.raises(ClosureInfeasible) as info:
        solve_closure([6.0], BURGERS, GRID, EQ)
    assert info.value.moment is not None
    # the capped mean set is narrower than the box
    model = burgers_model(-2.0, 2.0)
    grid = PhaseGrid.for_model(model, 100)
    with pytest.raises(ClosureInfeasible):
        solve_closure([1.99], model, grid, ClosureConfig(lambda_f=0.05))


def test_flux_examples():
    assert closure_flux(dirac(GRID, 2.5), BURGERS)[0] == pytest.approx(3.125)
    g = PhaseGrid((-1.0,), (3.0,), 2)  # centers 0 and 2
    mix = two_point(g, 0.0, 2.0)
    assert closure_flux(mix, BURGERS)[0] == pytest.approx(1.0)
    assert BURGERS.flux(mix.mean)[0] == pytest.approx(0.5)
    e = euler_model()
    eg = PhaseGrid((0.5, 0.5), (1.5, 1.5), 1)  # single cell centered at (1, 1)
    np.testing.assert_allclose(closure_flux(dirac(eg, (1.0, 1.0)), e), [1.0, 2.0])


def test_speed_examples():
    g = PhaseGrid((-3.5,), (3.5,), 7)  # integer centers
    assert expected_speed(dirac(g, -3.0), BURGERS) == pytest.approx(3.0)
    assert expected_speed(two_point(g, -1.0, 1.0), BURGERS) == pytest.approx(1.0)
    e = euler_model()
    eg = PhaseGrid((0.5, -0.5), (1.5, 0.5), 1)  # single cell at (1, 0)
    assert expected_speed(dirac(eg, (1.0, 0.0)), e) == pytest.approx(np.sqrt(1.5))


def test_entropy_examples():
    g = PhaseGrid((-3.5,), (3.5,), 7)
    assert measure_entropy(dirac(g, 1.0), quadratic_entropy()) == pytest.approx(0.5)
    g2 = PhaseGrid((0.6,), (0.7,), 1)
    assert measure_entropy(dirac(g2, 0.65), shifted_abs_entropy(0.5)) == pytest.approx(0.15)
    s = solve_closure([0.3], BURGERS, GRID, EQ)
    assert measure_entropy(s, unit_entropy()) == pytest.approx(1.0, abs=1e-12)


def test_objective_is_measure_entropy():
    s = solve_closure([0.3], BURGERS, GRID, EQ)
    c = Closure(BURGERS, GRID, EQ)
    _, obj, _ = c.solve_probabilities([[0.3]])
    assert obj[0] == pytest.approx(measure_entropy(s, quadratic_entropy()), abs=1e-12)


def test_weight_form_problem_agrees():
    from mvlp.lp import solve_lp

    p = closure_problem([0.3], BURGERS, GRID, EQ)
    sol = solve_lp(p)
    s = solve_closure([0.3], BURGERS, GRID, EQ)
    np.testing.assert_allclose(sol.x, s.weights, atol=1e-9)


def test_joint_two_grid_points():
    m = np.array([[-1.5], [2.5]])
    slices, obj = solve_joint_closure(m, BURGERS, GRID, EQ)
    for sl, mk in zip(slices, m[:, 0]):
        assert sl.support().tolist() == [int(np.argmin(np.abs(GRID.points[:, 0] - mk)))]
    assert obj == pytest.approx(0.5 * 1.0 * (0.5 * 1.5**2 + 0.5 * 2.5**2), abs=1e-9)


def test_joint_single_block_matches():
    s = solve_closure([0.7], BURGERS, GRID, EQ)
    slices, obj = solve_joint_closure([[0.7]], BURGERS, GRID, EQ)
    np.testing.assert_allclose(slices[0].weights, s.weights, atol=1e-9)
    # p0 * dxi = 0.5 * 2 = 1 for one cell on [-1, 1]
    assert obj == pytest.approx(measure_entropy(s, quadratic_entropy()), abs=1e-9)


def test_joint_infeasible_entry():
    with pytest.raises(ClosureInfeasible):
        solve_joint_closure([[0.0], [9.0]], BURGERS, GRID, EQ)


@pytest.mark.parametrize("entropy", [quadratic_entropy(), shifted_abs_entropy(0.5), unit_entropy()])
def test_slice_invariants(entropy):
    cfg = ClosureConfig(entropy=entropy)
    c = Closure(BURGERS, GRID, cfg)
    rng = np.random.default_rng(2)
    m = rng.uniform(-4.4, 4.4, size=(300, 1))
    for mk, sl in zip(m, c.slices(m)):
        assert sl.weights.min() >= -1e-9
        assert sl.weights.max() <= 1.0 / GRID.du + 1e-9
        assert GRID.du * sl.weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert sl.mean[0] == pytest.approx(mk[0], abs=1e-9)


def test_band_mode_mean_and_flux():
    cfg = ClosureConfig(relax_band=True)
    c = Closure(BURGERS, GRID, cfg)
    rng = np.random.default_rng(4)
    pts = GRID.points[rng.integers(1, GRID.size - 1, size=100)]
    h = GRID.spacing[0]
    for mk, sl in zip(pts, c.slices(pts)):
        assert abs(sl.mean[0] - mk[0]) <= h + 1e-9
        lip = np.max(np.abs(GRID.points[:, 0]))
        assert abs(closure_flux(sl, BURGERS)[0] - BURGERS.flux(mk)[0]) <= lip * h + 1e-9


def test_euler_jensen():
    e = euler_model()
    g = PhaseGrid.for_model(e, 10)
    c = Closure(e, g, ClosureConfig())
    rng = np.random.default_rng(6)
    m = rng.uniform([0.3, -0.5], [2.0, 1.0], size=(50, 2))
    ent = e.default_entropy
    for sl in c.slices(m):
        assert measure_entropy(sl, ent) >= ent(sl.mean) - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-4.5, 4.5))
def test_jensen_and_mean_consistency(m):
    sl = solve_closure([m], BURGERS, GRID, EQ)
    assert measure_entropy(sl, quadratic_entropy()) >= 0.5 * m**2 - 1e-12
    assert sl.mean[0] == pytest.approx(m, abs=1e-9)
    # convexity puts the support on the two nearest centers
    assert sl.support().size <= 2


def test_dedupe_is_transparent():
    c = Closure(BURGERS, GRID, EQ)
    m = np.array([[0.3], [0.3], [1.1], [0.3 + 1e-14]])
    P, obj, inv = c.solve_probabilities(m)
    assert P.shape[0] == 2
    assert inv[0] == inv[1] == inv[3] != inv[2]
