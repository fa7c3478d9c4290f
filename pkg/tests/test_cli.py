import glob
import json
import os

import numpy as np
import pytest

import main
from handlers.errors import ConfigError, DivergenceError
from scenarios import simple_handler
from scenarios.common import ResultBundle
from scenarios.runner import emit_plot_data, run_batch
from solvers.optimal_control import DescentTrace

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

TINY_SIMPLE = """[scenario]
kind = {kind}
time_unit = min

[model]
u0 = 1 m/min
k = 0.5 1/min
length = 5 m
t_star = 100 degC

[initial]
mean = 100 degC

[forcing]
mean = 100 degC
amplitude = 10 degC
period = 1 min

[grid]
n_cells = 20
dt = {dt} min
horizon = 6 min
refinements = 2
kink_window = 0.2 min

[optimizer]
max_iters = 5
log_every = 0
"""


def scenario_file(directory, name, kind="simple-validate", dt="0.02"):
    path = os.path.join(str(directory), name)
    with open(path, "w") as f:
        f.write(TINY_SIMPLE.format(kind=kind, dt=dt))
    return path


@pytest.fixture
def cli(tmp_path):
    """Run main() quietly with an empty global configuration."""
    base = ["-q", "-c", str(tmp_path / "no_configuration.ini")]

    def run(*args):
        return main.main(base + [str(a) for a in args])

    return run


def read_summary(directory):
    with open(os.path.join(str(directory), "summary.json")) as f:
        return json.load(f)


def test_no_command_prints_help(cli, capsys):
    assert cli() == 0
    assert "usage" in capsys.readouterr().out


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIGS, "*.ini"))))
def test_shipped_scenarios_validate(cli, path):
    assert cli("validate", path) == 0


def test_run_writes_result_bundle(cli, tmp_path):
    path = scenario_file(tmp_path, "tiny.ini")
    first, second = tmp_path / "first", tmp_path / "second"
    assert cli("--out", first, "run", path) == 0
    assert cli("--out", second, "run", path) == 0

    summary = read_summary(first)
    assert summary["status"] == "ok"
    assert summary["kind"] == "simple-validate"
    assert summary["schema_version"] == 1
    assert summary["refinement_cells"] == [20, 40]
    assert summary["max_outlet_error"] > 0
    for name in ("validation.csv", "outlet.csv", "config_echo.ini"):
        assert (first / name).is_file()
    assert (first / "validation.csv").read_bytes() == (second / "validation.csv").read_bytes()


def test_cfl_violation_is_a_configuration_error(cli, tmp_path):
    path = scenario_file(tmp_path, "coarse.ini", dt="0.5")
    out = tmp_path / "coarse"
    assert cli("validate", path) == 2
    assert cli("--out", out, "run", path) == 2
    summary = read_summary(out)
    assert summary["status"] == "invalid"
    assert "CFL" in summary["error"]


def test_missing_spectrum_source_is_a_configuration_error(cli, tmp_path):
    path = tmp_path / "spectrum.ini"
    path.write_text("[scenario]\nkind = spectrum\ntime_unit = s\n\n[spectrum]\nsource = missing.csv\n")
    out = tmp_path / "spectrum"
    assert cli("validate", path) == 2
    assert cli("--out", out, "run", path) == 2
    summary = read_summary(out)
    assert summary["status"] == "invalid"
    assert "missing.csv" in summary["error"]


def test_missing_forcing_file_is_a_configuration_error(cli, tmp_path):
    with open(os.path.join(CONFIGS, "table2_linear_control.ini")) as f:
        text = f.read()
    sinusoid = "family = sinusoid\nmean = 0 degC\namplitude = 5 degC\nperiod = 8.5 min\n"
    assert sinusoid in text
    path = tmp_path / "linear.ini"
    path.write_text(text.replace(sinusoid, "family = file\npath = missing.csv\n"))
    out = tmp_path / "linear"
    assert cli("validate", path) == 2
    assert cli("--out", out, "run", path) == 2
    summary = read_summary(out)
    assert summary["status"] == "invalid"
    assert "missing.csv" in summary["error"]


def test_empty_bundle_writes_nothing(tmp_path):
    assert emit_plot_data(ResultBundle("spectrum"), str(tmp_path)) == []
    assert os.listdir(str(tmp_path)) == []


def test_batch_returns_worst_exit_code(cli, tmp_path):
    scenarios = tmp_path / "scenarios"
    scenarios.mkdir()
    scenario_file(scenarios, "good.ini")
    scenario_file(scenarios, "bad.ini", dt="0.5")
    results = tmp_path / "results"
    assert cli("--out", results, "batch", scenarios) == 2
    assert read_summary(results / "good")["status"] == "ok"
    assert read_summary(results / "bad")["status"] == "invalid"


def test_batch_needs_scenarios(cli, tmp_path):
    with pytest.raises(ConfigError):
        run_batch(str(tmp_path))
    assert cli("batch", tmp_path) == 2


def test_divergence_keeps_partial_trace(cli, tmp_path, monkeypatch):
    trace = DescentTrace()
    trace.record(1.0, 0.0, 2.0, 0.5)
    trace.record(3.0, 0.1, 4.0, 0.5)

    def diverging(*args, **kwargs):
        raise DivergenceError("simple descent diverged", step=7, trace=trace)

    monkeypatch.setattr(simple_handler, "bb_descent", diverging)
    path = scenario_file(tmp_path, "control.ini", kind="simple-control")
    out = tmp_path / "control"
    assert cli("--out", out, "run", path) == 3
    summary = read_summary(out)
    assert summary["status"] == "diverged"
    assert summary["failed_step"] == 7
    lines = (out / "descent_trace.csv").read_text().splitlines()
    assert lines[0] == "iter,J,alpha,grad_norm,wall_ms"
    assert len(lines) == 3


def test_simple_control_run(cli, tmp_path):
    path = scenario_file(tmp_path, "control.ini", kind="simple-control")
    out = tmp_path / "control"
    assert cli("--out", out, "--max-iters", 3, "run", path) == 0
    summary = read_summary(out)
    assert summary["iterations"] == 3
    assert summary["stop_reason"] == "max_iters"
    assert summary["final_cost"] <= summary["initial_cost"]
    assert (out / "control_analytic.csv").is_file()


def test_equilibrium_scenario(cli, tmp_path):
    out = tmp_path / "equilibrium"
    assert cli("--out", out, "run", os.path.join(CONFIGS, "table2_equilibrium.ini")) == 0
    summary = read_summary(out)
    assert summary["method"] == "closed-form"
    assert summary["T_outlet"] == pytest.approx(136.78, abs=0.01)
    assert summary["X_outlet"] == pytest.approx(0.10019, abs=1e-5)
    assert summary["rho_inlet"] == pytest.approx(38.1972, rel=1e-5)
    assert summary["qdot_W_per_m3"] == pytest.approx(5092.958, rel=1e-6)
    assert summary["peclet"] == pytest.approx(8172, rel=0.01)
    assert summary["growth_factor"] > 1
    assert summary["max_method_gap_T"] < 0.1
    assert (out / "equilibrium.csv").read_text().startswith("x,eps_w,T\n")


def test_spectrum_scenario(cli, tmp_path):
    out = tmp_path / "spectrum"
    assert cli("--out", out, "run", os.path.join(CONFIGS, "spectrum_beat.ini")) == 0
    summary = read_summary(out)
    first, second = summary["peaks"][:2]
    assert first["omega_rad_per_s"] == pytest.approx(0.012217, abs=1e-6)
    assert second["omega_rad_per_s"] == pytest.approx(0.010472, abs=1e-6)
    assert second["normalized_power"] == pytest.approx(0.36, rel=1e-6)
    assert summary["beat_period_s"] == pytest.approx(3600.0)
    assert (out / "spectrum.csv").is_file()


@pytest.mark.slow
def test_forward_solver_acceptance(cli, tmp_path):
    out = tmp_path / "table1_validate"
    assert cli("--out", out, "run", os.path.join(CONFIGS, "table1_validate.ini")) == 0
    summary = read_summary(out)
    assert summary["max_outlet_error"] < 0.4
    assert summary["convergence_order"] > 1.0


@pytest.mark.slow
def test_nonlinear_control_acceptance(cli, tmp_path):
    out = tmp_path / "table2_nonlinear_control"
    assert cli("--out", out, "--max-iters", 150, "run", os.path.join(CONFIGS, "table2_nonlinear_control.ini")) == 0
    summary = read_summary(out)
    assert summary["final_cost"] < summary["baseline_cost"]
    assert summary["min_control_W_per_m3"] > 0
    assert summary["rms_reduction"] >= 0.9


@pytest.mark.slow
def test_constrained_control_acceptance(cli, tmp_path):
    out = tmp_path / "table2_constrained_control"
    path = os.path.join(CONFIGS, "table2_constrained_control.ini")
    assert cli("--out", out, "--max-iters", 150, "run", path) == 0
    summary = read_summary(out)
    assert summary["final_cost"] < summary["baseline_cost"]
    assert summary["min_control_W_per_m3"] >= 0
    assert summary["unconstrained_min_control_W_per_m3"] < 0
    assert summary["final_cost"] > summary["unconstrained_cost"]
    assert 0.05 < summary["rms_final_hour_controlled"] < summary["rms_final_hour_baseline"]

@pytest.mark.slow
def test_simple_control_acceptance(cli, tmp_path):
    out = tmp_path / "table1_control"
    assert cli("--out", out, "run", os.path.join(CONFIGS, "table1_control.ini")) == 0
    summary = read_summary(out)
    assert summary["adjoint_scheme"] == "continuous"
    assert summary["stop_reason"] == "cost_tolerance"
    assert summary["final_cost"] < 1e-8
    assert summary["iterations"] <= 1000
    assert summary["cost_spikes"] > 0
    assert summary["descent_seconds"] < 300
    assert summary["compare_window"] == pytest.approx(0.2)
    assert summary["compare_tail"] == pytest.approx(0.5)
    assert summary["max_control_discrepancy"] < 5.0
    assert summary["analytic_control_outlet_error"] < 0.3
    assert summary["jump_right"] == pytest.approx(81.48, abs=0.05)


@pytest.mark.slow
def test_linear_control_acceptance(cli, tmp_path):
    out = tmp_path / "table2_linear_control"
    assert cli("--out", out, "run", os.path.join(CONFIGS, "table2_linear_control.ini")) == 0
    summary = read_summary(out)
    assert summary["iterations"] <= 250
    assert summary["outlet_reduction_final_hour"] >= 0.95
    resolution = 2 * np.pi / (4 * 3600.0)
    first, second = summary["peaks"][:2]
    assert first["omega_rad_per_s"] == pytest.approx(0.012217, abs=resolution)
    assert second["omega_rad_per_s"] == pytest.approx(0.010472, abs=resolution)
    assert summary["beat_period_s"] == pytest.approx(3600.0, rel=0.1)
    assert summary["frequency_domain_reduction"] > 0.5
