import configparser
import os
from dataclasses import dataclass
from typing import Optional

from handlers.errors import ConfigError
from handlers.logger_handler import Logger

TAG = f"[{chr(int('f013', 16))} Config]"

# unit -> (kind, factor to SI seconds, offset, time exponent of the kind)
UNITS = {
    "m": ("length", 1.0, 0.0, 0), "cm": ("length", 1e-2, 0.0, 0), "mm": ("length", 1e-3, 0.0, 0),
    "km": ("length", 1e3, 0.0, 0),
    "m^2": ("area", 1.0, 0.0, 0), "m2": ("area", 1.0, 0.0, 0), "cm^2": ("area", 1e-4, 0.0, 0),
    "m/s": ("velocity", 1.0, 0.0, -1), "m/min": ("velocity", 1.0 / 60.0, 0.0, -1),
    "m/h": ("velocity", 1.0 / 3600.0, 0.0, -1),
    "1/s": ("rate", 1.0, 0.0, -1), "1/min": ("rate", 1.0 / 60.0, 0.0, -1), "1/h": ("rate", 1.0 / 3600.0, 0.0, -1),
    "s": ("time", 1.0, 0.0, 1), "min": ("time", 60.0, 0.0, 1), "h": ("time", 3600.0, 0.0, 1),
    "kg/s": ("mass_flow", 1.0, 0.0, -1), "kg/min": ("mass_flow", 1.0 / 60.0, 0.0, -1),
    "kg/h": ("mass_flow", 1.0 / 3600.0, 0.0, -1),
    "W": ("power", 1.0, 0.0, -1), "kW": ("power", 1e3, 0.0, -1), "J/s": ("power", 1.0, 0.0, -1),
    "W/m^3": ("heat_density", 1.0, 0.0, -1), "W/m3": ("heat_density", 1.0, 0.0, -1),
    "kW/m^3": ("heat_density", 1e3, 0.0, -1),
    "J/(kg*K)": ("specific_heat", 1.0, 0.0, 0), "J/(kg K)": ("specific_heat", 1.0, 0.0, 0),
    "kJ/(kg*K)": ("specific_heat", 1e3, 0.0, 0), "kJ/(kg K)": ("specific_heat", 1e3, 0.0, 0),
    "J/kg": ("latent_heat", 1.0, 0.0, 0), "kJ/kg": ("latent_heat", 1e3, 0.0, 0),
    "MJ/kg": ("latent_heat", 1e6, 0.0, 0),
    "W/(m*K)": ("conductivity", 1.0, 0.0, -1), "W/(m K)": ("conductivity", 1.0, 0.0, -1),
    "degC": ("temperature", 1.0, 0.0, 0), "C": ("temperature", 1.0, 0.0, 0),
    "K": ("temperature", 1.0, -273.15, 0),
    "kg/m^3": ("density", 1.0, 0.0, 0), "kg/m3": ("density", 1.0, 0.0, 0),
    "rad/s": ("angular_frequency", 1.0, 0.0, -1), "rad/min": ("angular_frequency", 1.0 / 60.0, 0.0, -1),
    "-": ("dimensionless", 1.0, 0.0, 0), "1": ("dimensionless", 1.0, 0.0, 0),
    "%": ("dimensionless", 1e-2, 0.0, 0),
}

TIME_UNITS = {"s": 1.0, "min": 60.0}

_MISSING = object()


def parse_quantity(text, kind, seconds_per_time_unit=1.0):
    """Convert '<number> <unit>' into internal units.

    Internal units are SI with the scenario time unit, so a quantity whose
    kind carries time exponent e is multiplied by seconds_per_time_unit**(-e).
    Dimensionless values may omit the unit.

    Raises:
        ConfigError: On a malformed value, an unknown unit or a unit of the wrong kind.
    """
    parts = str(text).strip().split(None, 1)
    if not parts:
        raise ConfigError("Empty quantity")
    try:
        number = float(parts[0])
    except ValueError as e:
        raise ConfigError(f"'{text}' does not start with a number") from e
    if len(parts) == 1:
        if kind != "dimensionless":
            raise ConfigError(f"'{text}' needs a unit of kind {kind}")
        return number
    unit = parts[1].strip()
    if unit not in UNITS:
        raise ConfigError(f"Unknown unit '{unit}' in '{text}'")
    unit_kind, factor, offset, exponent = UNITS[unit]
    if kind == "temperature_difference" and unit_kind == "temperature":
        unit_kind, offset = kind, 0.0
    if unit_kind != kind:
        raise ConfigError(f"Unit '{unit}' is a {unit_kind}, expected a {kind}")
    return (number * factor + offset) * seconds_per_time_unit ** (-exponent)


class ConfigHandler:
    def __init__(self, config_file='configuration.ini', required=False):
        self.config_file = config_file
        self.config = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        if required and not os.path.isfile(config_file):
            raise ConfigError(f"Configuration file {config_file} not found")
        try:
            self.config.read(config_file)
        except configparser.Error as e:
            raise ConfigError(f"Could not parse {config_file}: {e}") from e
        self.seconds_per_time_unit = 1.0

    def get_drymate_config(self):
        """ Retrieve the global drymate configuration. """
        return self.get_config_section('drymate')

    def get_config_section(self, section):
        """ Retrieve a specific section from the configuration. """
        if not self.config.has_section(section):
            return {}
        return {k: v for k, v in self.config[section].items()}

    def has_option(self, section, option):
        return self.config.has_option(section, option)

    def get_boolean(self, section, option, default=False):
        """ Get a boolean value from the configuration. """
        try:
            return self.config.getboolean(section, option)
        except (configparser.NoSectionError, configparser.NoOptionError):
            return default
        except ValueError as e:
            raise ConfigError(f"[{section}] {option}: {e}") from e

    def get_string(self, section, option, default=_MISSING):
        if self.config.has_option(section, option):
            return self.config.get(section, option).strip()
        if default is _MISSING:
            raise ConfigError(f"Missing option [{section}] {option} in {self.config_file}")
        return default

    def _typed(self, cast, section, option, default):
        value = self.get_string(section, option, None)
        if value is None:
            if default is _MISSING:
                raise ConfigError(f"Missing option [{section}] {option} in {self.config_file}")
            return default
        try:
            return cast(value)
        except ValueError as e:
            raise ConfigError(f"[{section}] {option} = {value!r} is not a valid {cast.__name__}") from e

    def get_int(self, section, option, default=_MISSING):
        return self._typed(int, section, option, default)

    def get_float(self, section, option, default=_MISSING):
        return self._typed(float, section, option, default)

    def get_quantity(self, section, option, kind, default=_MISSING):
        """ Read a '<number> <unit>' value converted to internal units. """
        value = self.get_string(section, option, None)
        if value is None:
            if default is _MISSING:
                raise ConfigError(f"Missing option [{section}] {option} in {self.config_file}")
            return default
        try:
            return parse_quantity(value, kind, self.seconds_per_time_unit)
        except ConfigError as e:
            raise ConfigError(f"[{section}] {option}: {e}") from e

    def echo(self, path):
        """ Write the configuration as read, so that reloading it gives the same scenario. """
        with open(path, 'w', newline='\n') as f:
            self.config.write(f)


@dataclass(frozen=True)
class OptimizerSettings:
    max_iters: int = 1000
    tol_cost: Optional[float] = None
    tol_grad: float = 1e-8
    initial_step: float = 1e-3
    adjoint_scheme: str = "discrete"
    log_every: int = 50


@dataclass(frozen=True)
class SpectrumSettings:
    source: str = "control"
    column: int = 1
    exclude_dc: bool = False
    window: Optional[str] = None
    threshold: float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario file.

    Attributes:
        path (str): Scenario file.
        kind (str): Scenario kind.
        time_unit (str): "min" or "s".
        output (str): Output directory for this scenario.
        handler (ConfigHandler): Reader for the remaining sections.
    """

    path: str
    kind: str
    time_unit: str
    output: str
    handler: ConfigHandler

    @property
    def seconds_per_time_unit(self):
        return TIME_UNITS[self.time_unit]

    @property
    def name(self):
        return os.path.splitext(os.path.basename(self.path))[0]

    def quantity(self, section, option, kind, default=_MISSING):
        return self.handler.get_quantity(section, option, kind, default)

    def grid_settings(self):
        n_cells = self.handler.get_int('grid', 'n_cells')
        dt = self.quantity('grid', 'dt', 'time')
        horizon = self.quantity('grid', 'horizon', 'time')
        return n_cells, dt, horizon

    def optimizer(self, max_iters=None):
        h = self.handler
        settings = OptimizerSettings(
            max_iters=h.get_int('optimizer', 'max_iters', 1000) if max_iters is None else int(max_iters),
            tol_cost=h.get_float('optimizer', 'tol_cost', None),
            tol_grad=h.get_float('optimizer', 'tol_grad', 1e-8),
            initial_step=h.get_float('optimizer', 'initial_step', 1e-3),
            adjoint_scheme=h.get_string('optimizer', 'adjoint_scheme', 'discrete'),
            log_every=h.get_int('optimizer', 'log_every', 50))
        if settings.max_iters < 1:
            raise ConfigError(f"[optimizer] max_iters must be at least 1, got {settings.max_iters}")
        if settings.adjoint_scheme not in ("discrete", "continuous"):
            raise ConfigError(f"[optimizer] adjoint_scheme must be discrete or continuous, "
                              f"got {settings.adjoint_scheme}")
        return settings

    def spectrum(self):
        h = self.handler
        window = h.get_string('spectrum', 'window', 'none')
        if window not in ('none', 'hann'):
            raise ConfigError(f"[spectrum] window must be none or hann, got {window}")
        return SpectrumSettings(
            source=h.get_string('spectrum', 'source', 'control'),
            column=h.get_int('spectrum', 'column', 1),
            exclude_dc=h.get_boolean('spectrum', 'exclude_dc', False),
            window=None if window == 'none' else window,
            threshold=h.get_float('spectrum', 'threshold', 0.05))

    def resolve(self, path):
        """ Resolve a path relative to the scenario file. """
        if os.path.isabs(path):
            return path
        return os.path.join(os.path.dirname(os.path.abspath(self.path)), path)


SCENARIO_KINDS = (
    "simple-validate", "simple-control", "drier-equilibrium", "drier-linear-control",
    "drier-nonlinear-control", "drier-constrained-control", "spectrum",
)


def load_scenario(path, output_directory=None):
    """Read and validate the [scenario] section of a scenario file.

    Args:
        path (str): Scenario INI file.
        output_directory (str, optional): Overrides the output directory.

    Returns:
        ScenarioConfig

    Raises:
        ConfigError: If the file is missing or the kind or time unit is unknown.
    """
    handler = ConfigHandler(path, required=True)
    kind = handler.get_string('scenario', 'kind')
    if kind not in SCENARIO_KINDS:
        raise ConfigError(f"Unknown scenario kind '{kind}' (expected one of {', '.join(SCENARIO_KINDS)})")
    time_unit = handler.get_string('scenario', 'time_unit', 'min')
    if time_unit not in TIME_UNITS:
        raise ConfigError(f"[scenario] time_unit must be min or s, got {time_unit}")
    handler.seconds_per_time_unit = TIME_UNITS[time_unit]
    name = os.path.splitext(os.path.basename(path))[0]
    output = output_directory or handler.get_string('scenario', 'output', os.path.join('results', name))
    Logger.log(f"{TAG} Loaded {path}: kind={kind}, time unit={time_unit} "
               f"({TIME_UNITS[time_unit]:g} s per unit)", "DEBUG")
    return ScenarioConfig(path, kind, time_unit, output, handler)