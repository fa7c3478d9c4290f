import numpy as np
import pytest

from handlers.logger_handler import Logger
from solvers.drier_model import DrierParams, solve_equilibrium
from solvers.forcing import Sinusoid
from solvers.numerics import SpaceTimeGrid
from solvers.simple_model import SimpleModelParams


@pytest.fixture(autouse=True)
def quiet_logger():
    Logger.set_max_log_level("WARNING")
    yield
    Logger.set_max_log_level("INFO")


@pytest.fixture
def table1_params():
    """One-equation model in minutes: l = 5 m, u0 = 1 m/min, k = 0.5 1/min, 10 degC inlet oscillation."""
    return SimpleModelParams(u0=1.0, k=0.5, length=5.0, t_star=100.0,
                             t_init=Sinusoid.constant(100.0),
                             t_inlet=Sinusoid.from_period(100.0, 10.0, 1.0))


@pytest.fixture
def table1_grid():
    return SpaceTimeGrid.from_horizon(200, 5.0, 1e-3, 10.0, velocity=1.0)


@pytest.fixture
def small_simple_grid():
    return SpaceTimeGrid.from_horizon(25, 5.0, 0.016, 6.0, velocity=1.0)


@pytest.fixture
def table2_params():
    """Drier parameters in SI seconds, inlet densities derived from the feed."""
    area = np.pi * 0.5 ** 2
    return DrierParams.from_feed(
        10.0 / 60.0, 0.15,
        u0=1.0 / 180.0, length=10.0, k_f=0.2 / 60.0, x_star=0.1,
        c_ps=1980.4, c_pl=4181.5, h_l=2.25e6, power=4e4, area=area,
        t_inlet=80.0, k_cond=0.6, t_ref=0.0, seconds_per_time_unit=1.0)


@pytest.fixture
def small_drier_grid(table2_params):
    return SpaceTimeGrid.from_horizon(20, 10.0, 2.0, 600.0, velocity=table2_params.u0)


@pytest.fixture
def drier_equilibrium(table2_params, small_drier_grid):
    return solve_equilibrium(table2_params, small_drier_grid, method="discrete")


def smooth_direction(grid, seed, amplitude=1.0):
    """A random band-limited signal on the time grid."""
    rng = np.random.default_rng(seed)
    t = grid.t / grid.horizon
    values = np.zeros_like(t)
    for mode in range(1, 5):
        values += rng.normal() * np.sin(np.pi * mode * t + rng.uniform(0, 2 * np.pi)) / mode
    return amplitude * values


@pytest.fixture
def direction():
    return smooth_direction
