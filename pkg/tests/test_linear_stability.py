import numpy as np
import pytest

from handlers.errors import ConfigError, DomainError
from solvers.drier_model import (LIQUID, SOLID, TEMPERATURE, DrierInlet, heat_source_density, solve_equilibrium,
                                 source_terms)
from solvers.linear_stability import (JacobianField, assemble_jacobian, control_from_amplitude,
                                      equilibrium_jacobian, frequency_domain_control, integrated_jacobian_eigenvalues,
                                      linear_response_error, positive_eigenvalue_integral, reduced_block_eigenvalues,
                                      sine_amplitude, solve_forward_linear)
from solvers.numerics import SpaceTimeGrid, TimeSeries

OMEGA = 2 * np.pi / 510.0


def test_jacobian_matches_finite_differences(table2_params):
    state = np.array([32.0, 5.0, 90.0])
    qdot = heat_source_density(table2_params)
    jac = assemble_jacobian(*state, qdot, table2_params)
    fd = np.zeros((3, 3))
    for j in range(3):
        h = 1e-6 * abs(state[j])
        up, down = state.copy(), state.copy()
        up[j] += h
        down[j] -= h
        fd[:, j] = (source_terms(up, qdot, table2_params) - source_terms(down, qdot, table2_params)) / (2 * h)
    np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-12)
    assert np.all(jac[SOLID] == 0)
    assert jac[LIQUID, TEMPERATURE] == 0


def test_jacobian_field_rejects_solid_row(small_drier_grid):
    matrices = np.zeros((small_drier_grid.n_nodes, 3, 3))
    JacobianField(small_drier_grid, matrices)
    matrices[3, SOLID, LIQUID] = 1.0
    with pytest.raises(ConfigError):
        JacobianField(small_drier_grid, matrices)
    with pytest.raises(ConfigError):
        JacobianField(small_drier_grid, np.zeros((4, 3, 3)))


def test_reduced_block_eigenvalues(table2_params, drier_equilibrium):
    eigenvalues = reduced_block_eigenvalues(equilibrium_jacobian(drier_equilibrium, table2_params))
    np.testing.assert_allclose(eigenvalues[:, 0], -table2_params.k_f, rtol=1e-9)
    assert np.all(eigenvalues[:, 1] >= 0)
    assert eigenvalues[0, 1] > eigenvalues[-1, 1]


def test_integrated_eigenvalues_include_zero(table2_params, drier_equilibrium):
    eigenvalues = integrated_jacobian_eigenvalues(drier_equilibrium, table2_params)
    assert eigenvalues.shape == (3,)
    assert np.min(np.abs(eigenvalues)) < 1e-12
    assert np.min(eigenvalues.real) == pytest.approx(-table2_params.k_f * table2_params.length, rel=1e-9)


def test_positive_eigenvalue_integral(table2_params, drier_equilibrium):
    integral = positive_eigenvalue_integral(drier_equilibrium, table2_params)
    assert integral.value[0] == 0.0
    assert np.all(np.diff(integral.value) >= 0)
    assert integral.value[-1] > 0
    np.testing.assert_allclose(integral.growth_factor, np.exp(integral.value / table2_params.u0))
    assert integral.growth_factor[-1] > 1.0

    at_outlet = positive_eigenvalue_integral(drier_equilibrium, table2_params, x=table2_params.length)
    assert isinstance(at_outlet.value, float)
    assert at_outlet.value == pytest.approx(integral.value[-1])
    with pytest.raises(DomainError):
        positive_eigenvalue_integral(drier_equilibrium, table2_params, x=-1.0)


def test_linear_model_superposition(table2_params, small_drier_grid, drier_equilibrium):
    t = small_drier_grid.t
    first = DrierInlet.from_series(0.0, 0.0, 5 * np.sin(OMEGA * t), small_drier_grid)
    second = DrierInlet.from_series(0.5 * np.sin(2 * OMEGA * t), 0.2, 0.0, small_drier_grid)
    both = DrierInlet(2 * first.values - 3 * second.values, small_drier_grid)
    heating = TimeSeries(100 * np.cos(OMEGA * t), small_drier_grid)
    zero = TimeSeries.constant(0.0, small_drier_grid)

    def run(inlet, q):
        return solve_forward_linear(drier_equilibrium, table2_params, inlet, q, small_drier_grid).outlet

    combined = run(both, heating)
    expected = 2 * run(first, zero) - 3 * run(second, zero) + run(DrierInlet(np.zeros((3, len(t))),
                                                                             small_drier_grid), heating)
    np.testing.assert_allclose(combined, expected, rtol=1e-9, atol=1e-9)


def test_perturbation_trajectory_has_no_moisture(table2_params, small_drier_grid, drier_equilibrium):
    inlet = DrierInlet.from_series(0.0, 0.0, 1.0, small_drier_grid)
    result = solve_forward_linear(drier_equilibrium, table2_params, inlet, TimeSeries.constant(0.0, small_drier_grid),
                                  small_drier_grid, store=True)
    assert result.states.shape == (small_drier_grid.n_steps + 1, 3, small_drier_grid.n_nodes)
    assert result.final_state.d_T.values[0] == 1.0
    with pytest.raises(ConfigError):
        result.outlet_moisture


def test_frequency_domain_control_vectorised(table2_params, drier_equilibrium):
    amplitudes = (0.0, 0.3j, sine_amplitude(5.0))
    omegas = np.array([0.5, 1.0, 2.0]) * OMEGA
    batch = frequency_domain_control(drier_equilibrium, table2_params, omegas, amplitudes)
    assert batch.shape == (3,)
    for omega, value in zip(omegas, batch):
        assert frequency_domain_control(drier_equilibrium, table2_params, omega, amplitudes) == pytest.approx(value)
    assert frequency_domain_control(drier_equilibrium, table2_params, OMEGA, (0, 0, 0)) == 0


def test_sine_amplitude():
    grid = SpaceTimeGrid.from_horizon(10, 1.0, 0.1, 10.0)
    series = control_from_amplitude(sine_amplitude(3.0), 1.3, grid)
    np.testing.assert_allclose(series.values, 3.0 * np.sin(1.3 * grid.t), atol=1e-12)


def test_frequency_domain_control_cancels_outlet(table2_params):
    grid = SpaceTimeGrid.from_horizon(200, 10.0, 0.1, 2400.0, velocity=table2_params.u0)
    equilibrium = solve_equilibrium(table2_params, grid, method="discrete")
    inlet = DrierInlet.from_series(0.0, 0.0, 5.0 * np.sin(OMEGA * grid.t), grid)
    amplitude = frequency_domain_control(equilibrium, table2_params, OMEGA, (0.0, 0.0, sine_amplitude(5.0)))
    control = control_from_amplitude(amplitude, OMEGA, grid)

    free = solve_forward_linear(equilibrium, table2_params, inlet, TimeSeries.constant(0.0, grid), grid)
    controlled = solve_forward_linear(equilibrium, table2_params, inlet, control, grid)
    late = grid.t > 1900.0
    rms_free = np.sqrt(np.mean(free.outlet[late, TEMPERATURE] ** 2))
    rms_controlled = np.sqrt(np.mean(controlled.outlet[late, TEMPERATURE] ** 2))
    assert 1 - rms_controlled / rms_free >= 0.95


def test_linear_response_error_shrinks_with_amplitude(table2_params):
    grid = SpaceTimeGrid.from_horizon(20, 10.0, 2.0, 2400.0, velocity=table2_params.u0)
    equilibrium = solve_equilibrium(table2_params, grid, method="discrete")
    large = linear_response_error(equilibrium, table2_params, grid, 0.04, OMEGA)
    small = linear_response_error(equilibrium, table2_params, grid, 0.01, OMEGA)
    assert small < 0.5 * large
