"""Three-equation disk-drier model with the falling-rate drying closure.

    d(eps_s)/dt + u0 d(eps_s)/dx = 0
    d(eps_l)/dt + u0 d(eps_l)/dx = -mdot
    dT/dt      + u0 dT/dx      = H

with mdot = k_f (eps_l - X* eps_s) and
H = (qdot - mdot [h_l - c_pl (T - T_ref)]) / (c_ps eps_s + c_pl eps_l).

All quantities are held in one coherent unit system: SI lengths, masses and
energies with the scenario time unit (seconds or minutes). The common
alias eps_w (water) is stored as eps_l and c_pw as c_pl.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from handlers.errors import ConfigError, DivergenceError, SingularStateError
from handlers.logger_handler import Logger
from solvers.numerics import ScalarField, TimeSeries, check_finite, control_values, upwind_derivative
from solvers import trajectory as trajectory_store

TAG = f"[{chr(int('f0e7', 16))} Drier]"

SOLID, LIQUID, TEMPERATURE = 0, 1, 2
COMPONENTS = ("eps_s", "eps_l", "T")


@dataclass(frozen=True)
class DrierParams:
    """Drier parameters in coherent internal units.

    Attributes:
        u0 (float): Conveyor speed [m / time unit].
        length (float): Drier length [m].
        k_f (float): Falling-rate coefficient [1 / time unit].
        x_star (float): Equilibrium moisture content (dry basis).
        c_ps, c_pl (float): Specific heats of solid and liquid [J/(kg K)].
        h_l (float): Latent heat [J/kg].
        t_ref (float): Reference temperature [degC].
        power (float): Heater power [J / time unit].
        area (float): Cross-sectional area [m^2].
        eps_s0, eps_l0 (float): Inlet solid and liquid densities [kg/m^3].
        t_inlet (float): Inlet temperature [degC].
        k_cond (float): Thermal conductivity [J/(time unit m K)], diagnostics only.
        seconds_per_time_unit (float): 1 for seconds, 60 for minutes.
        clamp_condensation (bool): Clamp mdot at zero instead of allowing re-humidification.
    """

    u0: float
    length: float
    k_f: float
    x_star: float
    c_ps: float
    c_pl: float
    h_l: float
    power: float
    area: float
    eps_s0: float
    eps_l0: float
    t_inlet: float
    k_cond: float = 0.6
    t_ref: float = 0.0
    seconds_per_time_unit: float = 1.0
    clamp_condensation: bool = False

    def __post_init__(self):
        for name in ("u0", "length", "k_f", "c_ps", "c_pl", "h_l", "area", "eps_s0", "k_cond",
                     "seconds_per_time_unit"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"Drier parameter {name} must be positive, got {getattr(self, name)}")
        for name in ("power", "x_star", "eps_l0"):
            if getattr(self, name) < 0:
                raise ConfigError(f"Drier parameter {name} must be non-negative, got {getattr(self, name)}")

    @classmethod
    def from_feed(cls, mass_flow, water_fraction, **kwargs):
        """Derive inlet densities from the feed mass flow and water mass fraction.

        Phi = mass_flow / area, rho = Phi / u0, eps_s0 = (1 - x_w) rho, eps_l0 = x_w rho.
        """
        if not 0.0 <= water_fraction <= 1.0:
            raise ConfigError(f"Inlet water fraction must lie in [0, 1], got {water_fraction}")
        if not mass_flow > 0:
            raise ConfigError(f"Inlet mass flow must be positive, got {mass_flow}")
        flux = mass_flow / kwargs["area"]
        density = flux / kwargs["u0"]
        return cls(eps_s0=(1.0 - water_fraction) * density, eps_l0=water_fraction * density, **kwargs)

    @property
    def inlet_density(self):
        return self.eps_s0 + self.eps_l0

    @property
    def inlet_flux(self):
        return self.inlet_density * self.u0

    @property
    def residence_time(self):
        return self.length / self.u0

    @property
    def relaxation_number(self):
        """k_f*l/u0, the number of moisture relaxation lengths in the drier."""
        return self.k_f * self.length / self.u0


def drying_rate(eps_s, eps_l, T, params: DrierParams):
    """Falling-rate drying rate k_f (eps_l - X* eps_s); negative means condensation."""
    rate = params.k_f * (np.asarray(eps_l, dtype=float) - params.x_star * np.asarray(eps_s, dtype=float))
    if params.clamp_condensation:
        rate = np.maximum(rate, 0.0)
    return rate


def heat_source_density(params: DrierParams):
    """Uniform volumetric heating P / (A l)."""
    return params.power / (params.area * params.length)


def heat_capacity(eps_s, eps_l, params: DrierParams):
    return params.c_ps * np.asarray(eps_s, dtype=float) + params.c_pl * np.asarray(eps_l, dtype=float)


def energy_rhs(eps_s, eps_l, T, qdot, params: DrierParams):
    """Temperature source H.

    Raises:
        SingularStateError: If the volumetric heat capacity is not positive somewhere.
    """
    capacity = heat_capacity(eps_s, eps_l, params)
    if np.any(capacity <= 0):
        raise SingularStateError("Volumetric heat capacity c_ps*eps_s + c_pl*eps_l vanished")
    rate = drying_rate(eps_s, eps_l, T, params)
    load = rate * (params.h_l - params.c_pl * (np.asarray(T, dtype=float) - params.t_ref))
    return (qdot - load) / capacity


def source_terms(states, qdot, params: DrierParams):
    """Right-hand side (0, -mdot, H) for states of shape (3, ...)."""
    eps_s, eps_l, T = states[SOLID], states[LIQUID], states[TEMPERATURE]
    out = np.zeros_like(states, dtype=float)
    out[LIQUID] = -drying_rate(eps_s, eps_l, T, params)
    out[TEMPERATURE] = energy_rhs(eps_s, eps_l, T, qdot, params)
    return out


def peclet_number(params: DrierParams):
    """u0 l (c_ps eps_s0 + c_pl eps_l0) / k_cond, evaluated in SI seconds."""
    u0_si = params.u0 / params.seconds_per_time_unit
    k_si = params.k_cond / params.seconds_per_time_unit
    return u0_si * params.length * float(heat_capacity(params.eps_s0, params.eps_l0, params)) / k_si


@dataclass(frozen=True, eq=False)
class DrierState:
    """Solid density, liquid density and temperature at the nodes of a grid."""

    eps_s: ScalarField
    eps_l: ScalarField
    T: ScalarField

    def __post_init__(self):
        if np.any(self.eps_s.values <= 0):
            raise DivergenceError("Solid density must stay positive")
        if np.any(self.eps_l.values < 0):
            raise DivergenceError("Liquid density must stay non-negative")

    @classmethod
    def from_array(cls, states, grid):
        return cls(*(ScalarField(states[c], grid) for c in (SOLID, LIQUID, TEMPERATURE)))

    @property
    def grid(self):
        return self.eps_s.grid

    @property
    def moisture_content(self):
        return self.eps_l.values / self.eps_s.values

    def as_array(self):
        return np.stack([self.eps_s.values, self.eps_l.values, self.T.values])


@dataclass(frozen=True, eq=False)
class EquilibriumProfile:
    grid: object
    eps_s_eq: float
    eps_l_eq: ScalarField
    T_eq: ScalarField
    method: str = "closed-form"

    @property
    def moisture_content(self):
        return self.eps_l_eq.values / self.eps_s_eq

    def as_state(self):
        return DrierState(ScalarField.constant(self.eps_s_eq, self.grid), self.eps_l_eq, self.T_eq)

    def as_array(self):
        return self.as_state().as_array()


def equilibrium_liquid(x, params: DrierParams):
    """eps_w(x) = eps_w0 exp(-k_f x/u0) + eps_s0 X* (1 - exp(-k_f x/u0))."""
    decay = np.exp(-params.k_f * np.asarray(x, dtype=float) / params.u0)
    return params.eps_l0 * decay + params.eps_s0 * params.x_star * (1.0 - decay)


def _rk4_temperature(params, grid, substeps):
    qdot = heat_source_density(params)
    h = grid.dx / substeps

    def slope(x, T):
        return float(energy_rhs(params.eps_s0, equilibrium_liquid(x, params), T, qdot, params)) / params.u0

    T = np.empty(grid.n_nodes)
    T[0] = params.t_inlet
    current, x = params.t_inlet, 0.0
    for i in range(1, grid.n_nodes):
        for _ in range(substeps):
            k1 = slope(x, current)
            k2 = slope(x + 0.5 * h, current + 0.5 * h * k1)
            k3 = slope(x + 0.5 * h, current + 0.5 * h * k2)
            k4 = slope(x + h, current + h * k3)
            current += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            x += h
        T[i] = current
        x = i * grid.dx
    return T


def _discrete_profiles(params, grid):
    # Steady upwind equations, node by node; each node is linear in its own unknowns.
    dx, u0 = grid.dx, params.u0
    qdot = heat_source_density(params)
    s = params.eps_s0
    eps_l = np.empty(grid.n_nodes)
    T = np.empty(grid.n_nodes)
    eps_l[0], T[0] = params.eps_l0, params.t_inlet
    for i in range(1, grid.n_nodes):
        if i == 1:
            diag, upstream_l, upstream_T = u0 / dx, u0 * eps_l[0] / dx, u0 * T[0] / dx
        else:
            diag = 1.5 * u0 / dx
            upstream_l = u0 * (4.0 * eps_l[i - 1] - eps_l[i - 2]) / (2.0 * dx)
            upstream_T = u0 * (4.0 * T[i - 1] - T[i - 2]) / (2.0 * dx)
        eps_l[i] = (upstream_l + params.k_f * params.x_star * s) / (diag + params.k_f)
        if params.clamp_condensation and eps_l[i] < params.x_star * s:
            eps_l[i] = upstream_l / diag
        rate = float(drying_rate(s, eps_l[i], 0.0, params))
        capacity = float(heat_capacity(s, eps_l[i], params))
        if capacity <= 0:
            raise SingularStateError(f"Volumetric heat capacity vanished at node {i}")
        coefficient = diag - rate * params.c_pl / capacity
        T[i] = (upstream_T + (qdot - rate * (params.h_l + params.c_pl * params.t_ref)) / capacity) / coefficient
    return eps_l, T


def solve_equilibrium(params: DrierParams, grid, method="closed-form", substeps=1):
    """Steady profile for the constant inlet state (eps_s0, eps_l0, T_inlet).

    Args:
        method (str): "closed-form" uses the exponential liquid profile and an RK4
            march for T; "discrete" solves the steady upwind scheme exactly, which
            makes the profile a fixed point of `solve_forward_nonlinear`.
        substeps (int): RK4 substeps per cell for the closed-form march.
    """
    if method == "closed-form":
        eps_l = equilibrium_liquid(grid.x, params)
        T = _rk4_temperature(params, grid, int(substeps))
    elif method == "discrete":
        eps_l, T = _discrete_profiles(params, grid)
    else:
        raise ConfigError(f"Unknown equilibrium method '{method}' (expected closed-form or discrete)")
    Logger.log(f"{TAG} Equilibrium ({method}): T(l)={T[-1]:.4f} degC, X(l)={eps_l[-1] / params.eps_s0:.5f}",
               "DEBUG")
    return EquilibriumProfile(grid, params.eps_s0, ScalarField(eps_l, grid), ScalarField(T, grid), method)


@dataclass(frozen=True, eq=False)
class DrierInlet:
    """Inlet values of (eps_s, eps_l, T) at every time sample."""

    values: np.ndarray
    grid: object

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (3, self.grid.n_steps + 1):
            raise ConfigError(f"Inlet series has shape {values.shape}, expected (3, {self.grid.n_steps + 1})")
        if not np.all(np.isfinite(values)):
            raise ConfigError("Inlet series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_series(cls, eps_s, eps_l, T, grid):
        t = grid.t
        columns = [np.broadcast_to(np.asarray(c(t) if callable(c) else c, dtype=float), t.shape)
                   for c in (eps_s, eps_l, T)]
        return cls(np.stack(columns), grid)

    @classmethod
    def constant(cls, params: DrierParams, grid):
        return cls.from_series(params.eps_s0, params.eps_l0, params.t_inlet, grid)

    @classmethod
    def relative_sinusoid(cls, eps_s0, eps_l_ref, T_ref, grid, delta_alpha, omega, ramp=0.0):
        """eps_s fixed, eps_l = eps_l_ref (1 + da sin wt), T = T_ref (1 + da sin wt)."""
        t = grid.t
        envelope = np.minimum(t / ramp, 1.0) if ramp > 0 else 1.0
        factor = 1.0 + delta_alpha * envelope * np.sin(omega * t)
        return cls.from_series(eps_s0, eps_l_ref * factor, T_ref * factor, grid)

    def at(self, n):
        return self.values[:, n]


@dataclass(frozen=True, eq=False)
class DrierTrajectory:
    """Result of a forward drier run.

    `states` holds the full space-time trajectory with shape
    (n_steps+1, 3, N+1) when it was kept (possibly a read-only memmap of a
    trajectory dump); outlet series and the final state are always kept.
    """

    grid: object
    outlet: np.ndarray
    final: np.ndarray
    states: Optional[np.ndarray] = None
    dump_path: Optional[str] = None

    @property
    def outlet_temperature(self):
        return TimeSeries(self.outlet[:, TEMPERATURE], self.grid)

    @property
    def outlet_moisture(self):
        return TimeSeries(self.outlet[:, LIQUID] / self.outlet[:, SOLID], self.grid)

    @property
    def final_state(self):
        return DrierState.from_array(self.final, self.grid)

    def state(self, n):
        if self.states is None:
            raise ConfigError("This trajectory was run without keeping the full space-time history")
        return np.asarray(self.states[n])


def march_explicit(u0, qdot_values, inlet, grid, initial, store, dump_path, source, tag,
                   positive_solid=True):
    """Explicit Euler march with the upwind stencil on all three components.

    `source(states, q)` returns the (3, N+1) right-hand side at one time level.
    """
    dx, dt = grid.dx, grid.dt
    current = np.array(initial, dtype=float)
    outlet = np.empty((grid.n_steps + 1, 3))
    outlet[0] = current[:, -1]

    states = None
    if dump_path is not None:
        states = trajectory_store.create_dump(dump_path, grid, 3)
    elif store:
        states = np.empty((grid.n_steps + 1, 3, grid.n_nodes))
    if states is not None:
        states[0] = current

    for n in range(grid.n_steps):
        nxt = current - u0 * dt * upwind_derivative(current, dx) + dt * source(current, qdot_values[n])
        nxt[:, 0] = inlet.at(n + 1)
        check_finite(nxt, tag, n + 1)
        if positive_solid and np.any(nxt[SOLID] <= 0):
            raise DivergenceError(f"Solid density became non-positive at step {n + 1}", step=n + 1)
        if states is not None:
            states[n + 1] = nxt
        outlet[n + 1] = nxt[:, -1]
        current = nxt

    if dump_path is not None:
        states.flush()
        states = trajectory_store.load_dump(dump_path).states
    return DrierTrajectory(grid, outlet, current, states, dump_path)


def solve_forward_nonlinear(params: DrierParams, qdot, inlet: DrierInlet, grid,
                            initial=None, store=True, dump_path=None):
    """March the nonlinear three-equation model.

    Args:
        params (DrierParams): Drier parameters.
        qdot (ControlSignal or TimeSeries): Volumetric heating on the time grid.
        inlet (DrierInlet): Inlet state at every time sample.
        grid (SpaceTimeGrid): Discretisation.
        initial (DrierState or EquilibriumProfile, optional): Initial state; defaults
            to the discrete equilibrium for the constant inlet.
        store (bool): Keep the full space-time trajectory in memory.
        dump_path (str, optional): Write the trajectory to a binary dump instead and
            reopen it read-only for replay.

    Returns:
        DrierTrajectory

    Raises:
        ConfigError: On a CFL violation or mismatched inlet grid.
        DivergenceError: On non-finite values or non-positive solid density.
    """
    grid = grid.validated(params.u0)
    grid.require_same_time(inlet.grid)
    qdot_values = control_values(qdot, grid)
    if initial is None:
        initial = solve_equilibrium(params, grid, method="discrete")
    grid.require_same_space(initial.grid)

    Logger.log(f"{TAG} Nonlinear march: {grid.n_steps} steps, N={grid.n_cells}, "
               f"CFL={grid.cfl_number(params.u0):.3g}", "DEBUG")
    return march_explicit(params.u0, qdot_values, inlet, grid, initial.as_array(), store, dump_path,
                          lambda states, q: source_terms(states, q, params), "drier state")
