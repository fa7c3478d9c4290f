"""Grids, field containers, the second-order upwind stencil and quadrature.

Fields live on the nodes x_i = i*dx, i = 0..N, with node 0 the inlet. The
inlet node is a boundary value and is never advanced by the stencil.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.sparse import diags, identity

from handlers.errors import ConfigError, DivergenceError, GridMismatchError

# Relative tolerance used when checking n_steps*dt against the horizon
ROUNDING = 1e-9


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform spatial grid on [0, length] plus a uniform time grid on [0, horizon].

    Attributes:
        n_cells (int): Number of cells N; there are N+1 nodes.
        length (float): Domain length.
        dt (float): Time step, in the scenario time unit.
        n_steps (int): Number of time steps.
        velocity (float, optional): Advection speed the CFL condition was checked against.
    """

    n_cells: int
    length: float
    dt: float
    n_steps: int
    velocity: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n_cells) < 2:
            raise ConfigError(f"A grid needs at least 3 nodes, got n_cells={self.n_cells}")
        if self.length <= 0 or self.dt <= 0:
            raise ConfigError(f"Grid length and dt must be positive (length={self.length}, dt={self.dt})")
        if int(self.n_steps) < 1:
            raise ConfigError(f"A grid needs at least one time step, got n_steps={self.n_steps}")

    @classmethod
    def from_horizon(cls, n_cells, length, dt, horizon, velocity=None):
        """Build a grid whose time axis covers [0, horizon] in steps of dt."""
        if dt <= 0 or horizon <= 0:
            raise ConfigError(f"dt and horizon must be positive (dt={dt}, horizon={horizon})")
        n_steps = int(round(horizon / dt))
        if n_steps < 1 or abs(n_steps * dt - horizon) > ROUNDING * horizon:
            raise ConfigError(f"Horizon {horizon:g} is not an integer multiple of dt {dt:g}")
        grid = cls(int(n_cells), float(length), float(dt), n_steps)
        return grid.validated(velocity) if velocity is not None else grid

    @property
    def dx(self):
        return self.length / self.n_cells

    @property
    def horizon(self):
        return self.n_steps * self.dt

    @property
    def n_nodes(self):
        return self.n_cells + 1

    @property
    def x(self):
        return np.linspace(0.0, self.length, self.n_nodes)

    @property
    def t(self):
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def cfl_admissible(self):
        return self.velocity is not None and self.velocity * self.dt < self.dx

    def cfl_number(self, u0):
        return u0 * self.dt / self.dx

    def validated(self, u0):
        """Return a copy of the grid flagged as CFL admissible for speed u0.

        Raises:
            ConfigError: If u0*dt >= dx.
        """
        if not u0 * self.dt < self.dx:
            raise ConfigError(
                f"CFL condition violated: u0={u0:g}, dt={self.dt:g}, dx={self.dx:g} "
                f"(u0*dt/dx={self.cfl_number(u0):.4g}, must be < 1)")
        return replace(self, velocity=float(u0))

    def space_weights(self):
        """Trapezoid weights over the nodes."""
        return trapezoid_weights(self.n_nodes, self.dx)

    def time_weights(self):
        """Trapezoid weights over the time samples."""
        return trapezoid_weights(self.n_steps + 1, self.dt)

    def refined(self, space=1, time=1):
        """Grid with the cell count and step count multiplied by the given factors."""
        return SpaceTimeGrid(self.n_cells * space, self.length, self.dt / time, self.n_steps * time)

    def require_same_space(self, other):
        if other.n_cells != self.n_cells or not np.isclose(other.length, self.length, rtol=ROUNDING):
            raise GridMismatchError(
                f"Spatial grids differ: N={self.n_cells}, l={self.length:g} vs N={other.n_cells}, l={other.length:g}")

    def require_same_time(self, other):
        if other.n_steps != self.n_steps or not np.isclose(other.dt, self.dt, rtol=ROUNDING):
            raise GridMismatchError(
                f"Time grids differ: {self.n_steps} x {self.dt:g} vs {other.n_steps} x {other.dt:g}")


def trapezoid_weights(n_points, h):
    weights = np.full(n_points, float(h))
    weights[0] = weights[-1] = 0.5 * h
    return weights


def _frozen_copy(values):
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values at the N+1 spatial nodes of a grid."""

    values: np.ndarray
    grid: SpaceTimeGrid

    def __post_init__(self):
        values = _frozen_copy(self.values)
        if values.shape != (self.grid.n_nodes,):
            raise GridMismatchError(f"Field has shape {values.shape}, grid expects ({self.grid.n_nodes},)")
        if not np.all(np.isfinite(values)):
            raise DivergenceError("Field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func: Callable, grid):
        return cls(np.broadcast_to(func(grid.x), (grid.n_nodes,)), grid)

    @classmethod
    def constant(cls, value, grid):
        return cls(np.full(grid.n_nodes, float(value)), grid)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Values at the n_steps+1 time samples of a grid."""

    values: np.ndarray
    grid: SpaceTimeGrid

    def __post_init__(self):
        values = _frozen_copy(self.values)
        if values.shape != (self.grid.n_steps + 1,):
            raise GridMismatchError(
                f"Series has shape {values.shape}, grid expects ({self.grid.n_steps + 1},)")
        if not np.all(np.isfinite(values)):
            raise DivergenceError("Time series contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func: Callable, grid):
        return cls(np.broadcast_to(func(grid.t), (grid.n_steps + 1,)), grid)

    @classmethod
    def constant(cls, value, grid):
        return cls(np.full(grid.n_steps + 1, float(value)), grid)

    def __len__(self):
        return len(self.values)


class ControlKind(Enum):
    SURROUNDINGS_TEMPERATURE = "surroundings-temperature"
    HEAT_DENSITY_PERTURBATION = "heat-density-perturbation"
    HEAT_DENSITY = "heat-density"
    SQUARED_PARAMETRIZATION = "squared-parametrization"


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """The optimisation unknown: a time series tagged with what it controls."""

    series: TimeSeries
    kind: ControlKind = ControlKind.SURROUNDINGS_TEMPERATURE

    @property
    def values(self):
        return self.series.values

    @property
    def grid(self):
        return self.series.grid

    @property
    def induced(self):
        """The physical control; (1/2)*theta^2 for the squared parametrization."""
        if self.kind is ControlKind.SQUARED_PARAMETRIZATION:
            return 0.5 * self.values ** 2
        return self.values

    @classmethod
    def constant(cls, value, grid, kind=ControlKind.SURROUNDINGS_TEMPERATURE):
        return cls(TimeSeries.constant(value, grid), kind)

    @classmethod
    def from_values(cls, values, grid, kind=ControlKind.SURROUNDINGS_TEMPERATURE):
        return cls(TimeSeries(values, grid), kind)


def _require_stencil(n_nodes):
    if n_nodes < 3:
        raise ConfigError(f"The upwind stencil needs at least 3 nodes, got {n_nodes}")


def upwind_derivative(values, dx):
    """Second-order upwind derivative along the last axis.

    (3f_i - 4f_{i-1} + f_{i-2}) / (2 dx) for i >= 2, first-order (f_1 - f_0) / dx
    at node 1 and zero at the inlet node.
    """
    f = np.asarray(values, dtype=float)
    _require_stencil(f.shape[-1])
    d = np.zeros_like(f)
    d[..., 1] = (f[..., 1] - f[..., 0]) / dx
    d[..., 2:] = (3.0 * f[..., 2:] - 4.0 * f[..., 1:-1] + f[..., :-2]) / (2.0 * dx)
    return d


def upwind_matrix(n_nodes, dx):
    """The stencil of `upwind_derivative` as a sparse CSR matrix."""
    _require_stencil(n_nodes)
    main = np.full(n_nodes, 1.5 / dx)
    main[:2] = (0.0, 1.0 / dx)
    lower = np.full(n_nodes - 1, -2.0 / dx)
    lower[0] = -1.0 / dx
    return diags([np.full(n_nodes - 2, 0.5 / dx), lower, main], [-2, -1, 0], format="csr")


def downwind_matrix(n_nodes, dx):
    """Mirror of `upwind_matrix` for information travelling from the outlet.

    Rows give (-3f_i + 4f_{i+1} - f_{i+2}) / (2 dx) for i <= N-2, first-order
    (f_N - f_{N-1}) / dx at node N-1 and zero at the outlet node.
    """
    _require_stencil(n_nodes)
    main = np.full(n_nodes, -1.5 / dx)
    main[-2:] = (-1.0 / dx, 0.0)
    upper = np.full(n_nodes - 1, 2.0 / dx)
    upper[-1] = 1.0 / dx
    return diags([main, upper, np.full(n_nodes - 2, -0.5 / dx)], [0, 1, 2], format="csr")


def euler_step_matrix(derivative, velocity, dt, rate=0.0):
    """I + dt (rate I - velocity D): one explicit Euler step of f_t + velocity D f = rate f."""
    size = derivative.shape[0]
    return (identity(size, format="csr") * (1.0 + rate * dt) - (velocity * dt) * derivative).tocsr()


def upwind_advect(field: ScalarField, u0, dt):
    """Explicit advective increment -u0*dt*df/dx of a field.

    Raises:
        ConfigError: On a CFL violation or fewer than 3 nodes.
    """
    grid = field.grid
    if not u0 * dt < grid.dx:
        raise ConfigError(
            f"CFL condition violated: u0={u0:g}, dt={dt:g}, dx={grid.dx:g} "
            f"(u0*dt/dx={u0 * dt / grid.dx:.4g}, must be < 1)")
    return ScalarField(-u0 * dt * upwind_derivative(field.values, grid.dx), grid)


def integrate_space(field: ScalarField):
    """Trapezoid integral of a field over [0, length]."""
    return float(trapezoid(field.values, dx=field.grid.dx))


def integrate_time(series: TimeSeries):
    """Trapezoid integral of a series over [0, horizon]."""
    return float(trapezoid(series.values, dx=series.grid.dt))


def inner_product_time(a, b, grid):
    """Trapezoid-weighted L2 inner product of two sampled signals on [0, horizon]."""
    return float(np.dot(grid.time_weights() * np.asarray(a, dtype=float), np.asarray(b, dtype=float)))


def norm_time(a, grid):
    return float(np.sqrt(max(inner_product_time(a, a, grid), 0.0)))


def check_finite(values, what, step):
    """Raise a DivergenceError if values contain NaN or Inf."""
    if not np.all(np.isfinite(values)):
        raise DivergenceError(f"Non-finite {what} at step {step}", step=step)


def observed_order(errors, factor=2.0):
    """Observed convergence orders between successive refinements by `factor`."""
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(factor)


def control_values(q, grid):
    """Sampled physical values of a ControlSignal or TimeSeries on `grid`'s time axis."""
    grid.require_same_time(q.grid)
    if isinstance(q, ControlSignal):
        return np.asarray(q.induced, dtype=float)
    return np.asarray(q.values, dtype=float)
