"""Result bundle and the builders that turn scenario sections into solver inputs."""

import os
from dataclasses import dataclass, field

import numpy as np

from handlers import utils
from handlers.errors import ConfigError
from handlers.logger_handler import Logger
from solvers.drier_model import DrierParams, heat_source_density, peclet_number
from solvers.forcing import SampledSeries, Sinusoid
from solvers.numerics import SpaceTimeGrid
from solvers.simple_model import SimpleModelParams

SCHEMA_VERSION = 1


@dataclass
class ResultBundle:
    """Series to write as CSV plus the fields of summary.json."""

    kind: str
    status: str = "ok"
    series: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add_series(self, name, header, columns):
        self.series[name] = (list(header), [np.asarray(c, dtype=float) for c in columns])

    @property
    def empty(self):
        return not self.series


def build_signal(config, section, kind="temperature", default_mean=None):
    """Sinusoid or sampled series described by `section`.

    Sinusoid options: mean, amplitude, period, phase (rad), ramp.
    File options: path (relative to the scenario file), column.
    """
    h = config.handler
    family = h.get_string(section, 'family', 'sinusoid')
    if family == 'sinusoid':
        mean = config.quantity(section, 'mean', kind, default_mean)
        if mean is None:
            raise ConfigError(f"Missing option [{section}] mean in {config.path}")
        amplitude_kind = "temperature_difference" if kind == "temperature" else kind
        amplitude = config.quantity(section, "amplitude", amplitude_kind, 0.0)
        if amplitude == 0.0:
            return Sinusoid.constant(mean)
        period = config.quantity(section, 'period', 'time')
        return Sinusoid.from_period(mean, amplitude, period,
                                    phase=config.quantity(section, 'phase', 'dimensionless', 0.0),
                                    ramp=config.quantity(section, 'ramp', 'time', 0.0))
    if family == 'file':
        path = config.resolve(h.get_string(section, 'path'))
        if not os.path.isfile(path):
            raise ConfigError(f"[{section}] path {path} not found")
        column = h.get_string(section, 'column', '1')
        times, values = utils.read_series_csv(path, int(column) if column.isdigit() else column)
        Logger.log(f"Read {len(times)} samples from {path}", "DEBUG")
        return SampledSeries(times, values)
    raise ConfigError(f"[{section}] family must be sinusoid or file, got {family}")


def build_grid(config, length, velocity):
    n_cells, dt, horizon = config.grid_settings()
    grid = SpaceTimeGrid.from_horizon(n_cells, length, dt, horizon, velocity=velocity)
    Logger.log(f"Grid: N={grid.n_cells}, dx={grid.dx:.6g} m, dt={grid.dt:g} {config.time_unit}, "
               f"{grid.n_steps} steps, CFL={grid.cfl_number(velocity):.4g}", "DEBUG")
    return grid


def build_simple_params(config):
    t_star = config.quantity('model', 't_star', 'temperature')
    params = SimpleModelParams(
        u0=config.quantity('model', 'u0', 'velocity'),
        k=config.quantity('model', 'k', 'rate'),
        length=config.quantity('model', 'length', 'length'),
        t_star=t_star,
        t_init=build_signal(config, 'initial', default_mean=t_star),
        t_inlet=build_signal(config, 'forcing'))
    Logger.log(f"Simple model: u0={params.u0:g} m/{config.time_unit}, k={params.k:g} 1/{config.time_unit}, "
               f"l={params.length:g} m, T*={params.t_star:g} degC, k*l/u0={params.damping_number:.4g}", "INFO")
    return params


def build_drier_params(config):
    """DrierParams from [model], with the inlet given as densities or as feed rate and water fraction."""
    spt = config.seconds_per_time_unit
    q = config.quantity
    area = q('model', 'area', 'area', None)
    if area is None:
        diameter = q('model', 'diameter', 'length')
        area = np.pi * diameter ** 2 / 4.0
    common = dict(
        u0=q('model', 'u0', 'velocity'),
        length=q('model', 'length', 'length'),
        k_f=q('model', 'k_f', 'rate'),
        x_star=q('model', 'x_star', 'dimensionless'),
        c_ps=q('model', 'c_ps', 'specific_heat'),
        c_pl=q('model', 'c_pl', 'specific_heat'),
        h_l=q('model', 'h_l', 'latent_heat'),
        power=q('model', 'power', 'power'),
        area=area,
        t_inlet=q('model', 't_inlet', 'temperature'),
        k_cond=q('model', 'k_cond', 'conductivity', 0.6 * spt),
        t_ref=q('model', 't_ref', 'temperature', 0.0),
        seconds_per_time_unit=spt,
        clamp_condensation=config.handler.get_boolean('model', 'clamp_condensation', False))

    if config.handler.has_option('model', 'mass_flow'):
        params = DrierParams.from_feed(q('model', 'mass_flow', 'mass_flow'),
                                       q('model', 'water_fraction', 'dimensionless'), **common)
    else:
        params = DrierParams(eps_s0=q('model', 'eps_s0', 'density'), eps_l0=q('model', 'eps_l0', 'density'),
                             **common)

    unit = config.time_unit
    Logger.log(f"Time unit {unit}: {spt:g} s per unit; powers and rates scaled by {spt:g}", "INFO")
    Logger.log(f"Drier: u0={params.u0:.6g} m/{unit}, l={params.length:g} m, k_f={params.k_f:.6g} 1/{unit}, "
               f"X*={params.x_star:g}, residence time={params.residence_time:.6g} {unit}", "INFO")
    Logger.log(f"Inlet: rho={params.inlet_density:.5g} kg/m^3, eps_s0={params.eps_s0:.5g}, "
               f"eps_l0={params.eps_l0:.5g}, T={params.t_inlet:g} degC", "INFO")
    Logger.log(f"Heat density qdot={heat_source_density(params) / spt:.6g} W/m^3, "
               f"Pe={peclet_number(params):.5g}", "INFO")
    return params


def add_trace(bundle, trace):
    """Attach a (possibly partial) descent trace as descent_trace.csv."""
    rows = np.array(trace.rows(), dtype=float).reshape(-1, 5)
    bundle.add_series("descent_trace.csv", ["iter", "J", "alpha", "grad_norm", "wall_ms"], rows.T)
