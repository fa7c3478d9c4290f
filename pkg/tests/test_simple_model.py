import numpy as np
import pytest

from handlers.errors import DomainError, UnsupportedCaseError
from solvers.forcing import Sinusoid
from solvers.numerics import ControlKind, ControlSignal, SpaceTimeGrid, observed_order
from solvers.simple_model import (SimpleModelParams, analytic_optimal_control, analytic_outlet,
                                  analytic_solution, jump_limits, solve_forward, washout_control)


def outlet_errors(params, grid, window=0.2):
    """Max outlet error overall, outside |t - t0| <= window and from t0 + 1 on."""
    q = ControlSignal.constant(100.0, grid)
    numeric = solve_forward(params, q, grid).outlet.values
    error = np.abs(numeric - analytic_outlet(params, q).values)
    t0 = params.residence_time
    away = np.abs(grid.t - t0) > window
    settled = grid.t >= t0 + 1.0
    return error.max(), error[away].max(), error[settled].max()


def test_constant_state_is_preserved(small_simple_grid):
    params = SimpleModelParams(1.0, 0.5, 5.0, 80.0, Sinusoid.constant(80.0), Sinusoid.constant(80.0))
    trajectory = solve_forward(params, ControlSignal.constant(80.0, small_simple_grid), small_simple_grid)
    np.testing.assert_allclose(trajectory.temperature, 80.0, rtol=0, atol=1e-12)


def test_forward_matches_closed_form(table1_params, table1_grid):
    overall, away, settled = outlet_errors(table1_params, table1_grid)
    assert overall < 0.4
    assert away < 0.3
    # past the kink: steady phase lag of the inlet wave
    assert settled == pytest.approx(0.24, abs=0.01)


def test_forward_converges_under_refinement(table1_params):
    grid = SpaceTimeGrid.from_horizon(200, 5.0, 1e-3, 8.0)
    errors = []
    for level in range(3):
        if level:
            grid = grid.refined(space=2, time=2)
        errors.append(outlet_errors(table1_params, grid)[2])
    assert np.min(observed_order(errors)) > 1.3
    assert errors[-1] < 0.05


def test_analytic_control_holds_set_point_under_refinement(table1_params):
    grid = SpaceTimeGrid.from_horizon(200, 5.0, 1e-3, 8.0)
    errors = []
    for level in range(3):
        if level:
            grid = grid.refined(space=2, time=2)
        settled = grid.t > table1_params.residence_time + 0.2
        outlet = solve_forward(table1_params, analytic_optimal_control(table1_params, grid), grid).outlet.values
        errors.append(np.abs(outlet[settled] - table1_params.t_star).max())
    assert errors[0] < 0.3
    assert errors[0] > errors[1] > errors[2]
    assert errors[-1] < 0.05


def test_closed_form_branches(table1_params, table1_grid):
    q = ControlSignal.constant(100.0, table1_grid)
    x = table1_grid.x
    np.testing.assert_allclose(analytic_solution(table1_params, q, x, 0.0), 100.0)
    t = table1_grid.t[:50]
    np.testing.assert_allclose(analytic_solution(table1_params, q, 0.0, t), table1_params.t_inlet(t), atol=1e-9)
    with pytest.raises(DomainError):
        analytic_solution(table1_params, q, 6.0, 1.0)
    with pytest.raises(DomainError):
        analytic_solution(table1_params, q, 1.0, 11.0)


def test_closed_form_relaxes_towards_constant_control(table1_grid):
    params = SimpleModelParams(1.0, 0.5, 5.0, 100.0, Sinusoid.constant(20.0), Sinusoid.constant(20.0))
    q = ControlSignal.constant(100.0, table1_grid)
    t = 2.0
    expected = 20.0 * np.exp(-0.5 * t) + 100.0 * (1.0 - np.exp(-0.5 * t))
    assert analytic_solution(params, q, 5.0, t) == pytest.approx(expected, abs=1e-6)


def test_jump_limits(table1_params):
    left, right = jump_limits(table1_params)
    assert left == pytest.approx(100.0, abs=1e-12)
    assert right == pytest.approx(81.48, abs=0.05)


def test_analytic_optimal_control_holds_set_point(table1_params, table1_grid):
    control = analytic_optimal_control(table1_params, table1_grid)
    assert control.kind is ControlKind.SURROUNDINGS_TEMPERATURE
    outlet = analytic_outlet(table1_params, control).values
    np.testing.assert_allclose(outlet, 100.0, atol=0.01)

    t = table1_grid.t
    first_late = np.flatnonzero(t >= table1_params.residence_time * (1 - 1e-12))[0]
    assert control.values[first_late] == pytest.approx(jump_limits(table1_params)[1])
    np.testing.assert_allclose(control.values[t < 4.9], 100.0)


def test_analytic_optimal_control_beats_washout(table1_params, table1_grid):
    exact = analytic_optimal_control(table1_params, table1_grid)
    flat = washout_control(table1_params, table1_grid)
    late = table1_grid.t > 6.0
    exact_error = np.abs(solve_forward(table1_params, exact, table1_grid).outlet.values - 100.0)[late].max()
    flat_error = np.abs(solve_forward(table1_params, flat, table1_grid).outlet.values - 100.0)[late].max()
    assert exact_error < 0.5
    assert flat_error > 0.7


def test_analytic_optimal_control_needs_uniform_initial_state(table1_grid):
    params = SimpleModelParams(1.0, 0.5, 5.0, 100.0, Sinusoid.constant(90.0),
                               Sinusoid.from_period(100.0, 10.0, 1.0))
    with pytest.raises(UnsupportedCaseError):
        analytic_optimal_control(params, table1_grid)
