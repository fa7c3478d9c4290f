import numpy as np

from handlers.errors import UnsupportedCaseError
from handlers.logger_handler import Logger
from scenarios.common import ResultBundle, add_trace, build_grid, build_simple_params
from solvers.numerics import ControlKind, ControlSignal, observed_order
from solvers.optimal_control import bb_descent, residual_rms, simple_control_problem
from solvers.simple_model import (analytic_optimal_control, analytic_outlet, jump_limits, solve_forward)

TAG = f"[{chr(int('f2c9', 16))} Simple]"

# Half-width of the window around t0 = l/u0 left out of error comparisons
KINK_WINDOW_S = 12.0


def outlet_error(params, grid, q_value, window):
    """Max |numeric - analytic| outlet error, overall and outside |t - l/u0| <= window."""
    q = ControlSignal.constant(q_value, grid, ControlKind.SURROUNDINGS_TEMPERATURE)
    numeric = solve_forward(params, q, grid).outlet.values
    analytic = analytic_outlet(params, q).values
    error = np.abs(numeric - analytic)
    away = np.abs(grid.t - params.residence_time) > window
    return numeric, analytic, float(error.max()), float(error[away].max())


class SimpleValidateHandler:
    """Forward solver against the closed-form solution, with a refinement study."""

    def __init__(self, config, max_iters=None):
        self.banner = f"{chr(int('EAD3', 16))} {chr(int('f2c9', 16))} Simple model validation"
        self.config = config
        self.params = build_simple_params(config)
        self.grid = build_grid(config, self.params.length, self.params.u0)
        self.control = config.quantity('control', 'constant', 'temperature', self.params.t_star)
        self.refinements = config.handler.get_int('grid', 'refinements', 3)
        self.window = config.quantity("grid", "kink_window", "time", KINK_WINDOW_S / config.seconds_per_time_unit)
        self.bundle = ResultBundle(config.kind)

    def run(self):
        Logger.banner(self.banner)
        numeric, analytic, max_error, _ = outlet_error(self.params, self.grid, self.control, self.window)
        t = self.grid.t
        self.bundle.add_series("validation.csv", ["t", "T_numeric", "T_analytic"], [t, numeric, analytic])
        self.bundle.add_series("outlet.csv", ["t", "T_outlet"], [t, numeric])
        Logger.log(f"{TAG} Max outlet error at N={self.grid.n_cells}: {max_error:.4e} degC", "INFO")

        errors, sizes = [], []
        grid = self.grid
        for level in range(self.refinements):
            if level:
                grid = grid.refined(space=2, time=2)
            _, _, _, away = outlet_error(self.params, grid, self.control, self.window)
            errors.append(away)
            sizes.append(grid.n_cells)
            Logger.log(f"{TAG} N={grid.n_cells}, dt={grid.dt:g}: outlet error away from t0 {away:.4e} degC", "INFO")

        self.bundle.summary.update({
            "max_outlet_error": max_error,
            "refinement_cells": sizes,
            "refinement_errors": errors,
            "convergence_order": float(np.min(observed_order(errors))) if len(errors) > 1 else None,
            "continuity_compatible": self.params.continuity_compatible,
        })
        if len(errors) > 1:
            Logger.log(f"{TAG} Observed convergence order {self.bundle.summary['convergence_order']:.3f}", "INFO")
        return self.bundle


class SimpleControlHandler:
    """BB descent on the simple model, compared with the closed-form optimal control.

    The comparison leaves out |t - t0| <= compare_window around the jump and the
    final compare_tail of the horizon, where the outlet can no longer react to
    the control; both windows are reported with the discrepancies.
    """

    def __init__(self, config, max_iters=None):
        self.banner = f"{chr(int('EAD3', 16))} {chr(int('f2c9', 16))} Simple model optimal control"
        self.config = config
        self.params = build_simple_params(config)
        self.grid = build_grid(config, self.params.length, self.params.u0)
        self.optimizer = config.optimizer(max_iters)
        self.window = config.quantity("optimizer", "compare_window", "time",
                                      KINK_WINDOW_S / config.seconds_per_time_unit)
        self.tail = config.quantity("optimizer", "compare_tail", "time", 0.0)
        self.bundle = ResultBundle(config.kind)
        self.trace = None

    def run(self):
        Logger.banner(self.banner)
        opt = self.optimizer
        problem = simple_control_problem(self.params, self.grid, opt.adjoint_scheme)
        q0 = ControlSignal.constant(self.params.t_star, self.grid, problem.kind)
        control, self.trace = bb_descent(problem, q0, opt.max_iters, opt.tol_cost, opt.tol_grad, opt.initial_step,
                                         opt.log_every, progress=Logger.is_enabled("INFO"))
        trace = self.trace
        add_trace(self.bundle, trace)
        t = self.grid.t
        outlet = problem.forward(control).outlet.values
        self.bundle.add_series("control.csv", ["t", "q"], [t, control.values])
        self.bundle.add_series("outlet.csv", ["t", "T_outlet"], [t, outlet])
        self.bundle.summary.update({
            "final_cost": trace.final_cost,
            "initial_cost": trace.initial_cost,
            "residual": residual_rms(trace.final_cost, self.grid),
            "iterations": trace.iterations,
            "stop_reason": trace.stop_reason,
            "cost_spikes": trace.spikes,
            "adjoint_scheme": opt.adjoint_scheme,
            "descent_seconds": float(np.sum(trace.wall_ms)) / 1e3,
        })
        Logger.log(f"{TAG} J: {trace.initial_cost:.4e} -> {trace.final_cost:.4e} in {trace.iterations} "
                   f"iterations ({trace.stop_reason})", "INFO")

        try:
            exact = analytic_optimal_control(self.params, self.grid)
        except UnsupportedCaseError as e:
            Logger.log(f"{TAG} No closed-form control to compare against: {e}", "WARNING")
            return self.bundle
        self.bundle.add_series("control_analytic.csv", ["t", "q"], [t, exact.values])
        self.compare(problem, control, exact)
        return self.bundle

    def compare(self, problem, control, exact):
        t = self.grid.t
        t0 = self.params.residence_time
        gap = np.abs(control.values - exact.values)
        near = np.abs(t - t0) <= self.window
        tail = t > self.grid.horizon - self.tail
        away = ~near & ~tail
        exact_outlet = problem.forward(exact).outlet.values
        settled = t > t0 + self.window
        left, right = jump_limits(self.params)
        self.bundle.summary.update({
            "compare_window": self.window,
            "compare_tail": self.tail,
            "max_control_discrepancy": float(gap[away].max()),
            "max_control_discrepancy_near_t0": float(gap[near].max()) if near.any() else None,
            "max_control_discrepancy_tail": float(gap[tail & ~near].max()) if (tail & ~near).any() else None,
            "analytic_control_cost": problem.cost(exact),
            "analytic_control_outlet_error": (float(np.abs(exact_outlet[settled] - self.params.t_star).max())
                                              if settled.any() else None),
            "jump_left": left,
            "jump_right": right,
        })
        Logger.log(f"{TAG} Closed-form control: jump {left:.4f} -> {right:.4f} degC at t0; max discrepancy "
                   f"{gap[away].max():.4f} degC outside +/-{self.window:g} of t0 and the last {self.tail:g}", "INFO")
        Logger.log(f"{TAG} Closed-form control on this grid: J={self.bundle.summary['analytic_control_cost']:.4e}",
                   "INFO")
