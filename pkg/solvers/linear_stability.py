"""Linearisation of the drier model about its equilibrium profile.

Perturbations obey d(dU)/dt + u0 d(dU)/dx = J(x) dU + dqdot(t) eta(x) e_T with
the Jacobian J of (0, -mdot, H) and eta = 1 / (c_ps eps_s + c_pl eps_l).
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from handlers.errors import ConfigError, DomainError, NoControlExistsError, SingularStateError
from handlers.logger_handler import Logger
from solvers.drier_model import (LIQUID, SOLID, TEMPERATURE, DrierInlet, DrierTrajectory,
                                 drying_rate, energy_rhs, heat_capacity, heat_source_density,
                                 march_explicit, solve_forward_nonlinear)
from solvers.numerics import ScalarField, TimeSeries, control_values

TAG = f"[{chr(int('f201', 16))} Linear]"

# Relative perturbation amplitude beyond which the linear model is flagged
LINEAR_REGIME_LIMIT = 0.1


@dataclass(frozen=True, eq=False)
class JacobianField:
    """Per-node 3x3 Jacobians, rows and columns ordered (eps_s, eps_l, T)."""

    grid: object
    matrices: np.ndarray

    def __post_init__(self):
        matrices = np.array(self.matrices, dtype=float)
        if matrices.shape != (self.grid.n_nodes, 3, 3):
            raise ConfigError(f"Jacobian field has shape {matrices.shape}, expected ({self.grid.n_nodes}, 3, 3)")
        if np.any(matrices[:, SOLID, :] != 0):
            raise ConfigError("The solid-density row of the Jacobian must vanish")
        matrices.setflags(write=False)
        object.__setattr__(self, "matrices", matrices)

    def __call__(self, n):
        return self.matrices


def assemble_jacobian(eps_s, eps_l, T, qdot, params):
    """Analytic Jacobian of (0, -mdot, H) with respect to (eps_s, eps_l, T).

    Inputs broadcast elementwise; the result has shape (..., 3, 3).

    Raises:
        SingularStateError: If the heat capacity vanishes.
    """
    eps_s, eps_l, T = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (eps_s, eps_l, T)))
    capacity = heat_capacity(eps_s, eps_l, params)
    if np.any(capacity <= 0):
        raise SingularStateError("Volumetric heat capacity vanished while assembling the Jacobian")

    rate = drying_rate(eps_s, eps_l, T, params)
    active = np.ones_like(rate)
    if params.clamp_condensation:
        raw = params.k_f * (eps_l - params.x_star * eps_s)
        active = (raw > 0).astype(float)
    dm_ds = -params.k_f * params.x_star * active
    dm_dl = params.k_f * active

    H = energy_rhs(eps_s, eps_l, T, qdot, params)
    latent = params.h_l - params.c_pl * (T - params.t_ref)

    jac = np.zeros(eps_s.shape + (3, 3))
    jac[..., LIQUID, SOLID] = -dm_ds
    jac[..., LIQUID, LIQUID] = -dm_dl
    jac[..., TEMPERATURE, SOLID] = (-dm_ds * latent - H * params.c_ps) / capacity
    jac[..., TEMPERATURE, LIQUID] = (-dm_dl * latent - H * params.c_pl) / capacity
    jac[..., TEMPERATURE, TEMPERATURE] = rate * params.c_pl / capacity
    return jac


def jacobian_field(states, qdot, params, grid):
    """JacobianField of a (3, N+1) state array."""
    states = np.asarray(states, dtype=float)
    return JacobianField(grid, assemble_jacobian(states[SOLID], states[LIQUID], states[TEMPERATURE],
                                                 qdot, params))


def control_influence(eps_s, eps_l, params):
    """eta = 1 / (c_ps eps_s + c_pl eps_l), the temperature response to unit heating."""
    capacity = heat_capacity(eps_s, eps_l, params)
    if np.any(capacity <= 0):
        raise SingularStateError("Volumetric heat capacity vanished")
    return 1.0 / capacity


def equilibrium_influence(equilibrium, params):
    return control_influence(equilibrium.eps_s_eq, equilibrium.eps_l_eq.values, params)


@dataclass(frozen=True)
class EigenvalueIntegral:
    value: object
    growth_factor: object


def positive_eigenvalue_integral(equilibrium, params, x=None):
    """lambda_+(x) = int_0^x mdot c_pl / (c_ps eps_s + c_pl eps_l) dx' and exp(lambda_+/u0).

    Returns values at every node when x is None, otherwise at x (linear
    interpolation of the nodal trapezoid integral).
    """
    grid = equilibrium.grid
    eps_l = equilibrium.eps_l_eq.values
    rate = drying_rate(equilibrium.eps_s_eq, eps_l, equilibrium.T_eq.values, params)
    integrand = rate * params.c_pl / heat_capacity(equilibrium.eps_s_eq, eps_l, params)
    cumulative = cumulative_trapezoid(integrand, grid.x, initial=0.0)
    if x is None:
        value = cumulative
    else:
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > grid.length * (1 + 1e-12)):
            raise DomainError(f"x must lie in [0, {grid.length:g}]")
        value = np.interp(x, grid.x, cumulative)
        if value.ndim == 0:
            value = float(value)
            return EigenvalueIntegral(value, float(np.exp(value / params.u0)))
    return EigenvalueIntegral(value, np.exp(value / params.u0))


def equilibrium_jacobian(equilibrium, params):
    return jacobian_field(equilibrium.as_array(), heat_source_density(params), params, equilibrium.grid)


def integrated_jacobian_eigenvalues(equilibrium, params):
    """Eigenvalues of int_0^l J dx; the zero solid row makes one of them vanish."""
    jac = equilibrium_jacobian(equilibrium, params).matrices
    return np.linalg.eigvals(trapezoid(jac, equilibrium.grid.x, axis=0))


def reduced_block_eigenvalues(jacobian: JacobianField):
    """Per-node eigenvalues of the (eps_l, T) block, sorted ascending."""
    return np.sort(np.linalg.eigvals(jacobian.matrices[:, 1:, 1:]).real, axis=-1)


@dataclass(frozen=True, eq=False)
class PerturbationState:
    d_eps_s: ScalarField
    d_eps_l: ScalarField
    d_T: ScalarField

    @classmethod
    def from_array(cls, states, grid):
        return cls(*(ScalarField(states[c], grid) for c in (SOLID, LIQUID, TEMPERATURE)))

    def as_array(self):
        return np.stack([self.d_eps_s.values, self.d_eps_l.values, self.d_T.values])


class PerturbationTrajectory(DrierTrajectory):
    """Forward trajectory of the linearised model; components are perturbations."""

    @property
    def outlet_moisture(self):
        raise ConfigError("Moisture content is not defined for perturbation trajectories")

    @property
    def final_state(self):
        return PerturbationState.from_array(self.final, self.grid)


def _linear_regime_check(trajectory, equilibrium, inlet, level="WARNING"):
    reference = np.abs(equilibrium.as_array())
    scale = np.maximum(reference, 1e-300)
    amplitude = max(np.max(np.abs(trajectory.final) / scale),
                    np.max(np.abs(trajectory.outlet) / scale[:, -1]),
                    np.max(np.abs(inlet.values) / scale[:, :1]))
    if amplitude > LINEAR_REGIME_LIMIT:
        Logger.log(f"{TAG} Relative perturbation amplitude {amplitude:.3g} exceeds "
                   f"{LINEAR_REGIME_LIMIT:.0%}; the linear model may be inaccurate", level)
    return amplitude


def solve_forward_linear(equilibrium, params, inlet: DrierInlet, dqdot, grid, initial=None, store=False,
                         warn_nonlinear=True):
    """March the linearised model with the Jacobian frozen on the equilibrium.

    Args:
        equilibrium (EquilibriumProfile): Reference profile.
        params (DrierParams): Drier parameters.
        inlet (DrierInlet): Inlet perturbations (d_eps_s, d_eps_l, d_T).
        dqdot (ControlSignal or TimeSeries): Heating perturbation.
        grid (SpaceTimeGrid): Discretisation, matching the equilibrium's spatial grid.
        initial (PerturbationState, optional): Initial perturbation; zero by default.
        store (bool): Keep the full space-time trajectory.
        warn_nonlinear (bool): Log a large relative perturbation as a warning;
            otherwise at debug level.

    Returns:
        PerturbationTrajectory
    """
    grid = grid.validated(params.u0)
    grid.require_same_space(equilibrium.grid)
    grid.require_same_time(inlet.grid)
    q = control_values(dqdot, grid)
    jac = equilibrium_jacobian(equilibrium, params).matrices
    eta = equilibrium_influence(equilibrium, params)
    start = np.zeros((3, grid.n_nodes)) if initial is None else initial.as_array()

    def source(states, forcing):
        out = np.einsum("iab,bi->ai", jac, states)
        out[TEMPERATURE] += forcing * eta
        return out

    result = march_explicit(params.u0, q, inlet, grid, start, store, None, source, "perturbation",
                            positive_solid=False)
    trajectory = PerturbationTrajectory(grid, result.outlet, result.final, result.states)
    _linear_regime_check(trajectory, equilibrium, inlet, "WARNING" if warn_nonlinear else "DEBUG")
    return trajectory


def sine_amplitude(amplitude):
    """Complex amplitude a such that Re(a exp(i w t)) = amplitude * sin(w t)."""
    return -1j * amplitude


def frequency_domain_control(equilibrium, params, omega, amplitudes):
    """Complex heating amplitude that cancels the outlet temperature at frequency omega.

    dqdot_w = [-dT_w(0) - int (rho/u0) exp(i w x/u0 - lambda_+/u0) dx]
              / int (eta/u0) exp(i w x/u0 - lambda_+/u0) dx

    with rho = (dH/deps_s) d_eps_s(x) + (dH/deps_l) d_eps_l(x) built from the
    explicit density perturbation solutions.

    Args:
        equilibrium (EquilibriumProfile): Reference profile.
        params (DrierParams): Drier parameters.
        omega (float or array): Angular frequency [rad / time unit].
        amplitudes (tuple): Complex inlet amplitudes (d_eps_s(0), d_eps_l(0), d_T(0)).

    Returns:
        complex or numpy.ndarray: One amplitude per omega.

    Raises:
        NoControlExistsError: If the denominator vanishes.
    """
    grid = equilibrium.grid
    x = grid.x
    u0, k_f = params.u0, params.k_f
    s0, l0, T0 = (complex(a) for a in amplitudes)

    jac = equilibrium_jacobian(equilibrium, params).matrices
    eta = equilibrium_influence(equilibrium, params)
    lam = cumulative_trapezoid(jac[:, TEMPERATURE, TEMPERATURE], x, initial=0.0)

    w = np.atleast_1d(np.asarray(omega, dtype=float))[:, None]
    travel = np.exp(-1j * w * x / u0)
    relax = np.exp(-k_f * x / u0)
    d_eps_s = s0 * travel
    d_eps_l = l0 * travel * relax + params.x_star * s0 * travel * (1.0 - relax)
    rho = jac[:, TEMPERATURE, SOLID] * d_eps_s + jac[:, TEMPERATURE, LIQUID] * d_eps_l

    kernel = np.exp(1j * w * x / u0 - lam / u0)
    numerator = -T0 - trapezoid(rho / u0 * kernel, x, axis=-1)
    denominator = trapezoid(eta / u0 * kernel, x, axis=-1)
    scale = trapezoid(np.abs(eta / u0 * kernel), x, axis=-1)
    if np.any(np.abs(denominator) <= 1e-12 * scale):
        raise NoControlExistsError(f"Frequency-domain control denominator vanishes at omega={omega}")

    control = numerator / denominator
    return complex(control[0]) if np.ndim(omega) == 0 else control


def control_from_amplitude(amplitude, omega, grid):
    """Real time signal Re(amplitude * exp(i omega t)) on the time grid."""
    return TimeSeries(np.real(amplitude * np.exp(1j * omega * grid.t)), grid)


def linear_response_error(equilibrium, params, grid, delta_alpha, omega):
    """Relative gap between the scaled nonlinear outlet response and the linear one.

    The nonlinear model is driven by the relative sinusoidal inlet of amplitude
    delta_alpha about the equilibrium inlet; the linear model by the matching
    unit-amplitude perturbation.
    """
    qdot = TimeSeries.constant(heat_source_density(params), grid)
    eps_l_in = equilibrium.eps_l_eq.values[0]
    T_in = equilibrium.T_eq.values[0]
    forced = DrierInlet.relative_sinusoid(equilibrium.eps_s_eq, eps_l_in, T_in, grid, delta_alpha, omega)
    nonlinear = solve_forward_nonlinear(params, qdot, forced, grid, initial=equilibrium.as_state(), store=False)
    scaled = (nonlinear.outlet[:, TEMPERATURE] - equilibrium.T_eq.values[-1]) / delta_alpha

    shape = np.sin(omega * grid.t)
    unit = DrierInlet.from_series(0.0, eps_l_in * shape, T_in * shape, grid)
    linear = solve_forward_linear(equilibrium, params, unit, TimeSeries.constant(0.0, grid), grid)
    reference = np.max(np.abs(linear.outlet[:, TEMPERATURE]))
    return float(np.max(np.abs(scaled - linear.outlet[:, TEMPERATURE])) / reference)
