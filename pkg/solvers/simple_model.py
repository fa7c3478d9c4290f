"""One-equation heating model T_t + u0 T_x = k (q - T).

Holds the explicit upwind solver, the closed-form solution, the closed-form
optimal control and the washout control used as validation oracles.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from handlers.errors import ConfigError, DivergenceError, DomainError, UnsupportedCaseError
from handlers.logger_handler import Logger
from solvers.numerics import (ControlKind, ControlSignal, ScalarField, TimeSeries,
                              control_values, euler_step_matrix, upwind_matrix)

TAG = f"[{chr(int('f2c9', 16))} Simple]"


@dataclass(frozen=True)
class SimpleModelParams:
    """Parameters of the one-equation model.

    `t_init` is a profile of x and `t_inlet` a signal of t; both are callables
    on numpy arrays and expose `derivative` and `has_derivative`
    (see `solvers.forcing`).
    """

    u0: float
    k: float
    length: float
    t_star: float
    t_init: Callable
    t_inlet: Callable

    def __post_init__(self):
        for name in ("u0", "k", "length"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Simple model parameter {name} must be positive, got {getattr(self, name)}")

    @property
    def continuity_compatible(self):
        return bool(np.isclose(self.t_init(0.0), self.t_inlet(0.0)))

    @property
    def residence_time(self):
        return self.length / self.u0

    @property
    def damping_number(self):
        """k*l/u0; large values wash out the inlet signal."""
        return self.k * self.length / self.u0


@dataclass(frozen=True, eq=False)
class SimpleTrajectory:
    grid: object
    temperature: np.ndarray

    @property
    def outlet(self):
        return TimeSeries(self.temperature[:, -1], self.grid)

    @property
    def inlet(self):
        return TimeSeries(self.temperature[:, 0], self.grid)

    @property
    def final_profile(self):
        return ScalarField(self.temperature[-1], self.grid)


def solve_forward(params: SimpleModelParams, q, grid):
    """March the model with the explicit second-order upwind scheme.

    Args:
        params (SimpleModelParams): Model parameters.
        q (ControlSignal or TimeSeries): Surroundings temperature on the time grid.
        grid (SpaceTimeGrid): Discretisation.

    Returns:
        SimpleTrajectory: Temperature at every node and time sample.

    Raises:
        ConfigError: On a CFL violation.
        DivergenceError: If the solution stops being finite.
    """
    grid = grid.validated(params.u0)
    qv = control_values(q, grid)
    dt = grid.dt
    inlet = np.broadcast_to(params.t_inlet(grid.t), (grid.n_steps + 1,))
    step = euler_step_matrix(upwind_matrix(grid.n_nodes, grid.dx), params.u0, dt, -params.k)
    forcing = dt * params.k * qv

    temperature = np.empty((grid.n_steps + 1, grid.n_nodes))
    temperature[0] = np.broadcast_to(params.t_init(grid.x), (grid.n_nodes,))
    Logger.log(f"{TAG} Forward march: {grid.n_steps} steps, N={grid.n_cells}, "
               f"CFL={grid.cfl_number(params.u0):.3g}", "DEBUG")

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(grid.n_steps):
            nxt = step @ temperature[n]
            nxt += forcing[n]
            nxt[0] = inlet[n + 1]
            temperature[n + 1] = nxt

    finite = np.isfinite(temperature).all(axis=1)
    if not finite.all():
        first = int(np.argmin(finite))
        raise DivergenceError(f"Non-finite temperature at step {first}", step=first)
    return SimpleTrajectory(grid, temperature)


class _RelaxationIntegral:
    """I(t) = exp(-k t) * int_0^t exp(k s) k q(s) ds by trapezoid on the control grid."""

    def __init__(self, k, q, grid):
        self.k = k
        self.times = grid.t
        self.shift = grid.horizon
        # exp(k (s - horizon)) keeps the integrand bounded for long horizons
        integrand = np.exp(k * (self.times - self.shift)) * k * control_values(q, grid)
        self.cumulative = cumulative_trapezoid(integrand, self.times, initial=0.0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-self.k * (t - self.shift)) * np.interp(t, self.times, self.cumulative)


def analytic_solution(params: SimpleModelParams, q, x, t):
    """Closed-form temperature T(x, t) for the control q.

    The initial-condition branch applies for u0*t < x and the inlet branch for
    u0*t >= x. Works elementwise on broadcastable x and t.

    Raises:
        DomainError: If x lies outside [0, l], t < 0 or t exceeds the control horizon.
    """
    grid = q.grid
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    scale = max(params.length, grid.horizon)
    if np.any(x < 0) or np.any(x > params.length + 1e-12 * scale):
        raise DomainError(f"x must lie in [0, {params.length:g}]")
    if np.any(t < 0) or np.any(t > grid.horizon + 1e-12 * scale):
        raise DomainError(f"t must lie in [0, {grid.horizon:g}] where the control is defined")

    integral = _RelaxationIntegral(params.k, q, grid)
    x, t = np.broadcast_arrays(x, t)
    inlet_branch = params.u0 * t >= x

    start = np.where(inlet_branch, 0.0, x - params.u0 * t)
    entry = np.where(inlet_branch, t - x / params.u0, 0.0)
    early = params.t_init(start) * np.exp(-params.k * t) + integral(t)
    decay = np.exp(-params.k * x / params.u0)
    late = (params.t_inlet(entry) - integral(entry)) * decay + integral(t)

    result = np.where(inlet_branch, late, early)
    return float(result) if result.ndim == 0 else result


def analytic_outlet(params: SimpleModelParams, q):
    """Closed-form outlet series T(l, t) on the control's time grid."""
    return TimeSeries(analytic_solution(params, q, params.length, q.grid.t), q.grid)


def _require_uniform_initial(params, grid):
    profile = np.broadcast_to(params.t_init(grid.x), (grid.n_nodes,))
    if not np.allclose(profile, params.t_star, rtol=0.0, atol=1e-12 * max(abs(params.t_star), 1.0)):
        raise UnsupportedCaseError(
            "The closed-form optimal control needs T_init identically equal to T_star "
            "(q(0) is only determined in that case)")
    if not (params.t_init.has_derivative and params.t_inlet.has_derivative):
        raise UnsupportedCaseError("The closed-form optimal control needs analytic T_init and T_inlet")


def jump_limits(params: SimpleModelParams):
    """One-sided limits q(t0-) and q(t0+) of the closed-form control at t0 = l/u0, with q(0) = 0."""
    t0 = params.residence_time
    decay = np.exp(-params.k * t0)
    left = params.t_star + params.u0 / params.k * float(params.t_init.derivative(0.0)) * decay
    right = params.t_star - (float(params.t_inlet(0.0))
                             + float(params.t_inlet.derivative(0.0)) / params.k) * decay
    return float(left), float(right)


def analytic_optimal_control(params: SimpleModelParams, grid):
    """Closed-form control that holds T(l, t) at T_star.

    Before t0 = l/u0 the control is explicit; after it each sample depends on
    q(t - t0), linearly interpolated between earlier samples. The first sample
    at or after t0 carries the right limit q(t0+) from `jump_limits`.

    Raises:
        UnsupportedCaseError: If T_init is not identically T_star.
    """
    _require_uniform_initial(params, grid)
    u0, k, length = params.u0, params.k, params.length
    t0 = params.residence_time
    if t0 <= grid.dt:
        raise ConfigError(f"Residence time {t0:g} must exceed dt {grid.dt:g} for the delayed recursion")
    t = grid.t
    q = np.empty_like(t)

    early = t < t0 * (1.0 - 1e-12)
    q[early] = params.t_star + u0 / k * params.t_init.derivative(length - u0 * t[early]) * np.exp(-k * t[early])

    late = np.flatnonzero(~early)
    if late.size:
        decay = np.exp(-k * t0)
        shifted = t[late] - t0
        base = params.t_star - (params.t_inlet(shifted) + params.t_inlet.derivative(shifted) / k) * decay
        position = np.maximum(shifted / grid.dt, 0.0)
        for index, n in enumerate(late):
            if index == 0:
                q[n] = jump_limits(params)[1]
                continue
            j = min(int(np.floor(position[index])), n - 1)
            frac = position[index] - j
            delayed = q[j] if frac <= 0.0 else q[j] * (1.0 - frac) + q[j + 1] * frac
            q[n] = base[index] + delayed * decay

    return ControlSignal.from_values(q, grid, ControlKind.SURROUNDINGS_TEMPERATURE)


def washout_control(params: SimpleModelParams, grid):
    """Constant control q = T_star, effective when k*l/u0 is large."""
    if params.damping_number < 3.0:
        Logger.log(f"{TAG} Washout control with k*l/u0={params.damping_number:.3g}: "
                   "inlet fluctuations are only damped by exp(-k*l/u0)", "DEBUG")
    return ControlSignal.constant(params.t_star, grid, ControlKind.SURROUNDINGS_TEMPERATURE)
