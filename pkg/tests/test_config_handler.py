import glob
import os

import pytest

from handlers.config_handler import SCENARIO_KINDS, ConfigHandler, load_scenario, parse_quantity
from handlers.errors import ConfigError
from scenarios.common import build_drier_params
from solvers.drier_model import heat_source_density, peclet_number

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@pytest.mark.parametrize("text, kind, seconds, expected", [
    ("1 m/min", "velocity", 60.0, 1.0),
    ("1 m/min", "velocity", 1.0, 1.0 / 60.0),
    ("0.2 1/min", "rate", 1.0, 0.2 / 60.0),
    ("2 h", "time", 60.0, 120.0),
    ("8.5 min", "time", 1.0, 510.0),
    ("4e4 W", "power", 60.0, 2.4e6),
    ("10 kg/min", "mass_flow", 1.0, 10.0 / 60.0),
    ("300 K", "temperature", 1.0, 26.85),
    ("5 K", "temperature_difference", 1.0, 5.0),
    ("5 degC", "temperature_difference", 1.0, 5.0),
    ("2.25 MJ/kg", "latent_heat", 1.0, 2.25e6),
    ("15 %", "dimensionless", 1.0, 0.15),
    ("0.15", "dimensionless", 1.0, 0.15),
])
def test_parse_quantity(text, kind, seconds, expected):
    assert parse_quantity(text, kind, seconds) == pytest.approx(expected)


@pytest.mark.parametrize("text, kind", [
    ("5", "length"),
    ("5 furlong", "length"),
    ("5 m", "time"),
    ("abc m", "length"),
    ("", "length"),
])
def test_parse_quantity_rejects(text, kind):
    with pytest.raises(ConfigError):
        parse_quantity(text, kind)


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIGS, "*.ini"))))
def test_shipped_scenarios_load(path):
    config = load_scenario(path)
    assert config.kind in SCENARIO_KINDS
    assert config.output == os.path.join("results", config.name)


def write_scenario(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_unknown_kind_and_unit(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(write_scenario(tmp_path, "[scenario]\nkind = drier-magic\n"))
    with pytest.raises(ConfigError):
        load_scenario(write_scenario(tmp_path, "[scenario]\nkind = spectrum\ntime_unit = h\n"))
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "missing.ini"))
    with pytest.raises(ConfigError):
        load_scenario(write_scenario(tmp_path, "[model]\nu0 = 1 m/s\n"))


def test_option_errors_name_the_section(tmp_path):
    config = load_scenario(write_scenario(tmp_path, "[scenario]\nkind = simple-validate\n"
                                                    "[model]\nu0 = fast\nk = 0.5 1/min\n"
                                                    "[optimizer]\nmax_iters = many\n"))
    with pytest.raises(ConfigError, match=r"\[model\] u0"):
        config.quantity("model", "u0", "velocity")
    with pytest.raises(ConfigError, match=r"\[optimizer\] max_iters"):
        config.optimizer()
    with pytest.raises(ConfigError, match="length"):
        config.quantity("model", "length", "length")
    assert config.quantity("model", "length", "length", 5.0) == 5.0
    assert config.quantity("model", "k", "rate") == pytest.approx(0.5)


def test_optimizer_settings(tmp_path):
    config = load_scenario(os.path.join(CONFIGS, "table1_control.ini"))
    settings = config.optimizer()
    assert settings.max_iters == 1000
    assert settings.tol_cost == 1e-9
    assert settings.adjoint_scheme == "continuous"
    assert config.optimizer(max_iters=5).max_iters == 5

    bad = load_scenario(write_scenario(tmp_path, "[scenario]\nkind = simple-control\n"
                                                 "[optimizer]\nadjoint_scheme = symplectic\n"))
    with pytest.raises(ConfigError):
        bad.optimizer()
    with pytest.raises(ConfigError):
        bad.optimizer(max_iters=0)


def test_spectrum_settings(tmp_path):
    config = load_scenario(os.path.join(CONFIGS, "spectrum_beat.ini"))
    settings = config.spectrum()
    assert settings.exclude_dc is True
    assert settings.window is None
    assert os.path.isfile(config.resolve(settings.source))

    bad = load_scenario(write_scenario(tmp_path, "[scenario]\nkind = spectrum\n[spectrum]\nwindow = kaiser\n"))
    with pytest.raises(ConfigError):
        bad.spectrum()


def test_echo_reloads_to_the_same_scenario(tmp_path):
    original = load_scenario(os.path.join(CONFIGS, "table1_validate.ini"))
    echoed = str(tmp_path / "config_echo.ini")
    original.handler.echo(echoed)
    reloaded = load_scenario(echoed)
    assert reloaded.kind == original.kind
    assert reloaded.time_unit == original.time_unit
    assert reloaded.grid_settings() == original.grid_settings()
    for section in ("model", "forcing", "grid"):
        assert reloaded.handler.get_config_section(section) == original.handler.get_config_section(section)


def test_drier_parameters_from_feed(table2_params):
    config = load_scenario(os.path.join(CONFIGS, "table2_equilibrium.ini"))
    params = build_drier_params(config)
    for name in ("u0", "k_f", "power", "area", "eps_s0", "eps_l0", "k_cond"):
        assert getattr(params, name) == pytest.approx(getattr(table2_params, name), rel=1e-12)
    assert params.inlet_density == pytest.approx(38.1972, rel=1e-5)
    assert heat_source_density(params) == pytest.approx(5092.958, rel=1e-6)


def test_drier_parameters_do_not_depend_on_time_unit(tmp_path):
    path = os.path.join(CONFIGS, "table2_equilibrium.ini")
    with open(path) as f:
        text = f.read().replace("time_unit = s", "time_unit = min")
    seconds = build_drier_params(load_scenario(path))
    minutes = build_drier_params(load_scenario(write_scenario(tmp_path, text)))
    assert minutes.u0 == pytest.approx(60 * seconds.u0)
    assert minutes.eps_s0 == pytest.approx(seconds.eps_s0)
    assert heat_source_density(minutes) / 60 == pytest.approx(heat_source_density(seconds))
    assert peclet_number(minutes) == pytest.approx(peclet_number(seconds))
    assert minutes.residence_time == pytest.approx(seconds.residence_time / 60)


def test_global_configuration_defaults(tmp_path):
    handler = ConfigHandler(str(tmp_path / "absent.ini"))
    assert handler.get_drymate_config() == {}
    path = write_scenario(tmp_path, "[drymate]\nloglevel = DEBUG\nmax_workers = 2\n", "configuration.ini")
    assert ConfigHandler(path).get_drymate_config() == {"loglevel": "DEBUG", "max_workers": "2"}
    with pytest.raises(ConfigError):
        ConfigHandler(str(tmp_path / "absent.ini"), required=True)
