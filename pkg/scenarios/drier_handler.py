import os

import numpy as np

from handlers.logger_handler import Logger
from scenarios.common import ResultBundle, add_trace, build_drier_params, build_grid, build_signal
from solvers.drier_model import (LIQUID, SOLID, TEMPERATURE, DrierInlet, heat_source_density, peclet_number,
                                 solve_equilibrium)
from solvers.forcing import Sinusoid
from solvers.linear_stability import (control_from_amplitude, equilibrium_jacobian, frequency_domain_control,
                                      integrated_jacobian_eigenvalues, positive_eigenvalue_integral,
                                      reduced_block_eigenvalues, sine_amplitude, solve_forward_linear)
from solvers.numerics import ControlKind, ControlSignal, SpaceTimeGrid, TimeSeries
from solvers.optimal_control import (bb_descent, bb_descent_nonneg, linear_control_problem,
                                     nonlinear_control_problem, residual_rms, theta_from_control)
from solvers.spectral import power_spectrum

TAG = f"[{chr(int('f0e7', 16))} Drier]"

FINAL_WINDOW_S = 3600.0


def rms(values):
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(values ** 2))) if values.size else 0.0


class DrierScenario:
    """Shared set-up of the drier studies: parameters, grid, equilibrium and output helpers."""

    title = "Drier"
    default_equilibrium = "discrete"

    def __init__(self, config, max_iters=None):
        self.banner = f"{chr(int('EAD3', 16))} {chr(int('f0e7', 16))} {self.title}"
        self.config = config
        self.spt = config.seconds_per_time_unit
        self.params = build_drier_params(config)
        self.grid = self.build_grid()
        self.equilibrium_method = config.handler.get_string('initial', 'equilibrium', self.default_equilibrium)
        self.spectrum_settings = config.spectrum()
        self.max_iters = max_iters
        self.bundle = ResultBundle(config.kind)

    def build_grid(self):
        return build_grid(self.config, self.params.length, self.params.u0)

    def equilibrium(self):
        substeps = self.config.handler.get_int('initial', 'rk4_substeps', 1)
        return solve_equilibrium(self.params, self.grid, method=self.equilibrium_method, substeps=substeps)

    def final_window(self):
        """Samples in the final hour, never earlier than one residence time."""
        start = max(self.grid.horizon - FINAL_WINDOW_S / self.spt, self.params.residence_time)
        return self.grid.t >= start

    def add_profile(self, states):
        eps_s, eps_l, T = states[SOLID], states[LIQUID], states[TEMPERATURE]
        self.bundle.add_series("profile_final.csv", ["x", "eps_s", "eps_l", "T", "X"],
                               [self.grid.x, eps_s, eps_l, T, eps_l / eps_s])

    def add_spectrum(self, values, exclude_dc=None):
        settings = self.spectrum_settings
        if exclude_dc is None:
            exclude_dc = settings.exclude_dc
        spectrum = power_spectrum(TimeSeries(values, self.grid), exclude_dc, settings.window, settings.threshold)
        omega = spectrum.frequencies / self.spt
        self.bundle.add_series("spectrum.csv", ["omega_rad_per_s", "normalized_power"],
                               [omega, spectrum.normalized_power])
        peaks = [(w / self.spt, p) for w, p in spectrum.peaks]
        self.bundle.summary["peaks"] = [{"omega_rad_per_s": w, "normalized_power": p} for w, p in peaks]
        self.bundle.summary["beat_period_s"] = spectrum.beat.period * self.spt if spectrum.beat else None
        if peaks:
            Logger.log(f"{TAG} Spectrum: {len(peaks)} peaks, strongest at {peaks[0][0]:.5f} rad/s", "INFO")
        if spectrum.beat:
            Logger.log(f"{TAG} Beat period {spectrum.beat.period * self.spt:.1f} s", "INFO")
        return spectrum


class DrierEquilibriumHandler(DrierScenario):
    """Equilibrium profile with the Peclet number and the stability diagnostics."""

    title = "Drier equilibrium"
    default_equilibrium = "closed-form"

    def build_grid(self):
        if self.config.handler.has_option('grid', 'dt'):
            return super().build_grid()
        n_cells = self.config.handler.get_int('grid', 'n_cells')
        dx = self.params.length / n_cells
        return SpaceTimeGrid(n_cells, self.params.length, 0.5 * dx / self.params.u0, 1).validated(self.params.u0)

    def run(self):
        Logger.banner(self.banner)
        params = self.params
        eq = self.equilibrium()
        other = solve_equilibrium(params, self.grid, method="discrete" if eq.method == "closed-form"
                                  else "closed-form")
        x = self.grid.x
        self.bundle.add_series("equilibrium.csv", ["x", "eps_w", "T"], [x, eq.eps_l_eq.values, eq.T_eq.values])

        growth = positive_eigenvalue_integral(eq, params, params.length)
        eigenvalues = integrated_jacobian_eigenvalues(eq, params)
        block = reduced_block_eigenvalues(equilibrium_jacobian(eq, params))
        self.bundle.summary.update({
            "method": eq.method,
            "T_outlet": float(eq.T_eq.values[-1]),
            "X_outlet": float(eq.moisture_content[-1]),
            "rho_inlet": params.inlet_density,
            "eps_s0": params.eps_s0,
            "eps_l0": params.eps_l0,
            "qdot_W_per_m3": heat_source_density(params) / self.spt,
            "peclet": peclet_number(params),
            "lambda_plus": growth.value,
            "growth_factor": growth.growth_factor,
            "jacobian_eigenvalues_real": np.real(eigenvalues).tolist(),
            "jacobian_eigenvalues_imag": np.imag(eigenvalues).tolist(),
            "outlet_block_eigenvalues": block[-1].tolist(),
            "max_method_gap_T": float(np.max(np.abs(eq.T_eq.values - other.T_eq.values))),
        })
        Logger.log(f"{TAG} T_eq(l)={eq.T_eq.values[-1]:.4f} degC, X(l)={eq.moisture_content[-1]:.5f}, "
                   f"lambda+={growth.value:.5g}, growth factor={growth.growth_factor:.5g}", "INFO")
        return self.bundle


class DrierLinearControlHandler(DrierScenario):
    """Optimal heating perturbation for the drier linearised about its equilibrium."""

    title = "Drier linear control"

    def __init__(self, config, max_iters=None):
        super().__init__(config, max_iters)
        self.signal = build_signal(config, 'forcing', default_mean=0.0)

    def run(self):
        Logger.banner(self.banner)
        params, grid = self.params, self.grid
        opt = self.config.optimizer(self.max_iters)
        eq = self.equilibrium()
        signal = self.signal
        inlet = DrierInlet.from_series(0.0, 0.0, signal, grid)
        problem = linear_control_problem(eq, params, inlet, grid, opt.adjoint_scheme)

        zero = ControlSignal.constant(0.0, grid, problem.kind)
        control, trace = bb_descent(problem, zero, opt.max_iters, opt.tol_cost, opt.tol_grad, opt.initial_step,
                                    opt.log_every, progress=Logger.is_enabled("INFO"))
        add_trace(self.bundle, trace)

        controlled = solve_forward_linear(eq, params, inlet, control, grid)
        uncontrolled = problem.outlet(problem.forward(zero))
        window = self.final_window()
        reduction = 1.0 - rms(controlled.outlet[window, TEMPERATURE]) / max(rms(uncontrolled[window]), 1e-300)

        t = grid.t
        self.bundle.add_series("control.csv", ["t", "q"], [t, control.values / self.spt])
        self.bundle.add_series("outlet.csv", ["t", "T_outlet", "T_outlet_uncontrolled"],
                               [t, controlled.outlet[:, TEMPERATURE], uncontrolled])
        self.add_profile(eq.as_array() + controlled.final)
        self.add_spectrum(control.values)
        self.bundle.summary.update({
            "final_cost": trace.final_cost,
            "initial_cost": trace.initial_cost,
            "residual": residual_rms(trace.final_cost, grid),
            "iterations": trace.iterations,
            "stop_reason": trace.stop_reason,
            "outlet_reduction_final_hour": reduction,
        })
        Logger.log(f"{TAG} Residual {residual_rms(trace.final_cost, grid):.4g} degC after {trace.iterations} "
                   f"iterations; outlet fluctuation reduced by {reduction:.1%}", "INFO")

        if isinstance(signal, Sinusoid) and signal.omega > 0 and signal.ramp == 0 and signal.mean == 0:
            self.frequency_domain(eq, signal, inlet, uncontrolled, window)
        return self.bundle

    def frequency_domain(self, eq, signal, inlet, uncontrolled, window):
        amplitude = sine_amplitude(signal.amplitude) * np.exp(1j * signal.phase)
        q_hat = frequency_domain_control(eq, self.params, signal.omega, (0.0, 0.0, amplitude))
        q = control_from_amplitude(q_hat, signal.omega, self.grid)
        outlet = solve_forward_linear(eq, self.params, inlet, q, self.grid).outlet[:, TEMPERATURE]
        reduction = 1.0 - rms(outlet[window]) / max(rms(uncontrolled[window]), 1e-300)
        self.bundle.summary.update({
            "frequency_domain_amplitude_W_per_m3": abs(q_hat) / self.spt,
            "frequency_domain_phase_rad": float(np.angle(q_hat)),
            "frequency_domain_reduction": reduction,
        })
        Logger.log(f"{TAG} Frequency-domain control |q|={abs(q_hat) / self.spt:.5g} W/m^3 reduces the outlet "
                   f"fluctuation by {reduction:.1%}", "INFO")


class DrierNonlinearControlHandler(DrierScenario):
    """Optimal heating for the nonlinear drier under a relative sinusoidal inlet disturbance."""

    title = "Drier nonlinear control"
    default_delta_alpha = 0.05

    def __init__(self, config, max_iters=None):
        super().__init__(config, max_iters)
        h = config.handler
        self.delta_alpha = h.get_float('forcing', 'delta_alpha', self.default_delta_alpha)
        self.period = config.quantity('forcing', 'period', 'time', 510.0 / self.spt)
        self.ramp = config.quantity('forcing', 'ramp', 'time', 0.0)
        self.dump = h.get_boolean('scenario', 'trajectory_dump', False)
        self.export_stride = h.get_int('scenario', 'export_stride', 0)

    def setup(self, opt):
        params, grid = self.params, self.grid
        eq = self.equilibrium()
        omega = 2.0 * np.pi / self.period
        inlet = DrierInlet.relative_sinusoid(eq.eps_s_eq, eq.eps_l_eq.values[0], eq.T_eq.values[0], grid,
                                             self.delta_alpha, omega, self.ramp)
        t_star = self.config.quantity('model', 't_star', 'temperature', float(eq.T_eq.values[-1]))
        dump_path = os.path.join(self.config.output, "trajectory.bin") if self.dump else None
        problem = nonlinear_control_problem(params, inlet, grid, t_star, eq.as_state(), opt.adjoint_scheme,
                                            dump_path)
        baseline = ControlSignal.constant(heat_source_density(params), grid, ControlKind.HEAT_DENSITY)
        Logger.log(f"{TAG} delta_alpha={self.delta_alpha:g}, period={self.period:g} {self.config.time_unit}, "
                   f"T*={t_star:.4f} degC", "INFO")
        return problem, baseline

    def descend(self, problem, baseline, opt):
        return bb_descent(problem, baseline, opt.max_iters, opt.tol_cost, opt.tol_grad, opt.initial_step,
                          opt.log_every, progress=Logger.is_enabled("INFO"))

    def run(self):
        Logger.banner(self.banner)
        opt = self.config.optimizer(self.max_iters)
        problem, baseline = self.setup(opt)
        control, trace = self.descend(problem, baseline, opt)
        add_trace(self.bundle, trace)
        self.report(problem, baseline, control, trace)
        return self.bundle

    def report(self, problem, baseline, control, trace):
        grid = self.grid
        t = grid.t
        baseline_outlet = problem.outlet(problem.forward(baseline))
        result = problem.forward(control)
        outlet = problem.outlet(result)
        window = self.final_window()
        baseline_rms = rms(baseline_outlet[window] - problem.t_star)
        controlled_rms = rms(outlet[window] - problem.t_star)
        baseline_cost = trace.initial_cost
        heating = np.asarray(control.induced)

        self.bundle.add_series("control.csv", ["t", "q"], [t, heating / self.spt])
        self.bundle.add_series("outlet.csv", ["t", "T_outlet", "T_outlet_baseline"], [t, outlet, baseline_outlet])
        self.add_profile(result.final)
        self.add_spectrum(heating, exclude_dc=self.config.handler.get_boolean('spectrum', 'exclude_dc', True))
        if self.export_stride > 0 and result.states is not None:
            self.add_trajectory(result.states)
        self.bundle.summary.update({
            "final_cost": trace.final_cost,
            "baseline_cost": baseline_cost,
            "residual": residual_rms(trace.final_cost, grid),
            "iterations": trace.iterations,
            "stop_reason": trace.stop_reason,
            "t_star": problem.t_star,
            "delta_alpha": self.delta_alpha,
            "rms_final_hour_baseline": baseline_rms,
            "rms_final_hour_controlled": controlled_rms,
            "rms_reduction": 1.0 - controlled_rms / max(baseline_rms, 1e-300),
            "min_control_W_per_m3": float(heating.min()) / self.spt,
        })
        Logger.log(f"{TAG} J: {trace.initial_cost:.4e} -> {trace.final_cost:.4e} (baseline {baseline_cost:.4e}); "
                   f"final-hour RMS {baseline_rms:.4f} -> {controlled_rms:.4f} degC", "INFO")

    def add_trajectory(self, states):
        steps = np.arange(0, self.grid.n_steps + 1, self.export_stride)
        x = self.grid.x
        t = np.repeat(self.grid.t[steps], x.size)
        sampled = np.asarray(states[steps])
        columns = [t, np.tile(x, steps.size)] + [sampled[:, c, :].ravel() for c in (SOLID, LIQUID, TEMPERATURE)]
        self.bundle.add_series("trajectory.csv", ["t", "x", "eps_s", "eps_l", "T"], columns)


class DrierConstrainedControlHandler(DrierNonlinearControlHandler):
    """Nonnegative heating through q = theta^2/2, for inlet disturbances large enough to make it bind."""

    title = "Drier constrained control"
    default_delta_alpha = 0.2

    def descend(self, problem, baseline, opt):
        theta0 = TimeSeries(theta_from_control(baseline), self.grid)
        result = bb_descent_nonneg(problem, theta0, opt.max_iters, opt.tol_cost, opt.tol_grad, opt.initial_step,
                                   opt.log_every, progress=Logger.is_enabled("INFO"))
        if self.config.handler.get_boolean('optimizer', 'compare_unconstrained', False):
            free, free_trace = bb_descent(problem, baseline, opt.max_iters, opt.tol_cost, opt.tol_grad,
                                          opt.initial_step, opt.log_every, progress=Logger.is_enabled("INFO"))
            gap = rms(np.asarray(result.control.induced) - free.values) / max(rms(free.values), 1e-300)
            self.bundle.summary.update({
                "unconstrained_cost": free_trace.final_cost,
                "unconstrained_min_control_W_per_m3": float(free.values.min()) / self.spt,
                "relative_rms_gap_to_unconstrained": gap,
            })
            Logger.log(f"{TAG} Unconstrained descent: J={free_trace.final_cost:.4e}, min q="
                       f"{free.values.min() / self.spt:.4g} W/m^3, relative RMS gap {gap:.3%}", "INFO")
        return result
