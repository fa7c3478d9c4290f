"""Tracking cost, adjoint solvers and Barzilai-Borwein steepest descent.

The cost is J(q) = 1/2 int_0^tau [T(l, t) - T_star]^2 dt. Two adjoint schemes
are offered:

  discrete    exact transpose of the explicit forward march, so the
              directional derivative <G, dq> is exact up to rounding.
  continuous  backward march of -psi_t - u0 psi_x - J^T psi = 0 with the
              mirrored stencil and psi(l, t) = -(T(l, t) - T_star) / u0.

Both store psi on the forward nodes, with psi(., tau) = 0, and share the
search direction d(t) = int_0^l psi_T eta dx (eta = k for the simple model).
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from tqdm import tqdm

from handlers.errors import ConfigError, DivergenceError
from handlers.logger_handler import Logger
from solvers.drier_model import TEMPERATURE, solve_equilibrium, solve_forward_nonlinear
from solvers.linear_stability import (assemble_jacobian, control_influence, equilibrium_influence,
                                      equilibrium_jacobian, solve_forward_linear)
from solvers.numerics import (ControlKind, ControlSignal, ScalarField, TimeSeries, check_finite,
                              control_values, downwind_matrix, euler_step_matrix, inner_product_time,
                              integrate_time, norm_time, upwind_matrix)
from solvers.simple_model import solve_forward

TAG = f"[{chr(int('f140', 16))} Descent]"

ADJOINT_SCHEMES = ("discrete", "continuous")


def cost(outlet: TimeSeries, t_star):
    """1/2 int_0^tau (outlet - t_star)^2 dt by trapezoid."""
    return 0.5 * integrate_time(TimeSeries((outlet.values - t_star) ** 2, outlet.grid))


def residual_rms(cost_value, grid):
    """Root-mean-square outlet mismatch sqrt(2 J / tau)."""
    return float(np.sqrt(2.0 * max(cost_value, 0.0) / grid.horizon))


@dataclass(frozen=True, eq=False)
class AdjointState:
    psi_T: ScalarField
    psi_s: Optional[ScalarField] = None
    psi_l: Optional[ScalarField] = None


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Backward solution on the forward grid.

    `psi` has shape (n_steps+1, components, N+1) when kept; the temperature
    multiplier is the last component. `direction` holds int psi_T eta dx per
    time sample when an influence field was supplied to the sweep.
    """

    grid: object
    psi: Optional[np.ndarray]
    scheme: str = "discrete"
    direction: Optional[np.ndarray] = None

    @property
    def psi_T(self):
        if self.psi is None:
            raise ConfigError("The adjoint sweep did not keep the multiplier history")
        return self.psi[:, -1, :]

    def state(self, n):
        psi = self.psi[n]
        if psi.shape[0] == 1:
            return AdjointState(ScalarField(psi[0], self.grid))
        return AdjointState(ScalarField(psi[-1], self.grid), ScalarField(psi[0], self.grid),
                            ScalarField(psi[1], self.grid))


def _backward_sweep(grid, u0, mismatch, coupling, n_components, scheme, influence, store):
    """March the adjoint from tau to 0.

    coupling(n, field) applies J_n^T to a (components, N+1) field; a number
    stands for the constant J = coupling * I. influence(n) gives the (N+1,)
    weight of psi_T in the search direction.
    """
    if scheme not in ADJOINT_SCHEMES:
        raise ConfigError(f"Unknown adjoint scheme '{scheme}' (expected one of {', '.join(ADJOINT_SCHEMES)})")
    grid = grid.validated(u0)
    grid.require_same_time(mismatch.grid)
    r = mismatch.values
    M, dt, dx = grid.n_steps, grid.dt, grid.dx
    wt, wx = grid.time_weights(), grid.space_weights()
    source = coupling if callable(coupling) else None
    rate = 0.0 if source is not None else float(coupling)

    psi_history = np.zeros((M + 1, n_components, grid.n_nodes)) if store else None
    direction = np.zeros(M + 1) if influence is not None else None

    def keep(n, psi):
        if store:
            psi_history[n] = psi
        if direction is not None:
            direction[n] = float(np.dot(wx, psi[-1] * influence(n)))

    if scheme == "discrete":
        # mu^n = dJ/dU^n; psi^n is mu^{n+1} rescaled to a density in x and t
        transport = euler_step_matrix(upwind_matrix(grid.n_nodes, dx), u0, dt, rate).T.tocsr()
        density = -dt / wx
        mu = np.zeros((n_components, grid.n_nodes))
        mu[-1, -1] = wt[M] * r[M]
        for n in range(M - 1, -1, -1):
            mu[:, 0] = 0.0
            keep(n, mu * (density / wt[n]))
            nxt = (transport @ mu.T).T
            if source is not None:
                nxt += dt * source(n, mu)
            nxt[-1, -1] += wt[n] * r[n]
            check_finite(nxt, "adjoint", n)
            mu = nxt
    else:
        transport = euler_step_matrix(downwind_matrix(grid.n_nodes, dx), -u0, dt, rate)
        psi = np.zeros((n_components, grid.n_nodes))
        for n in range(M - 1, -1, -1):
            nxt = (transport @ psi.T).T
            if source is not None:
                nxt += dt * source(n, psi)
            nxt[:, -1] = 0.0
            nxt[-1, -1] = -r[n] / u0
            check_finite(nxt, "adjoint", n)
            psi = nxt
            keep(n, psi)

    return AdjointTrajectory(grid, psi_history, scheme, direction)


def solve_adjoint_simple(params, outlet: TimeSeries, grid, scheme="discrete", store=True):
    """Adjoint of the simple model, -psi_t - u0 psi_x + k psi = 0, psi(x, tau) = 0.

    Args:
        params (SimpleModelParams): Model parameters.
        outlet (TimeSeries): Forward outlet temperature.
        grid (SpaceTimeGrid): Forward grid.
        scheme (str): "discrete" or "continuous".
        store (bool): Keep psi at every time sample.

    Returns:
        AdjointTrajectory: One component; `direction` holds int k psi dx.
    """
    mismatch = TimeSeries(outlet.values - params.t_star, outlet.grid)
    k = params.k
    influence = np.full(grid.n_nodes, k)
    return _backward_sweep(grid, params.u0, mismatch, -k, 1, scheme,
                           lambda n: influence, store)


def gradient_simple(adjoint: AdjointTrajectory, params):
    """Search direction d(t) = int_0^l k psi(x, t) dx."""
    if adjoint.psi is None:
        return TimeSeries(adjoint.direction, adjoint.grid)
    weights = adjoint.grid.space_weights()
    return TimeSeries(params.k * adjoint.psi[:, 0, :] @ weights, adjoint.grid)


def _as_jacobian_source(jacobian):
    if callable(jacobian):
        return jacobian
    matrices = np.asarray(getattr(jacobian, "matrices", jacobian), dtype=float)
    return lambda n: matrices


def _as_influence_source(eta, grid):
    if eta is None or callable(eta):
        return eta
    values = np.asarray(getattr(eta, "values", eta), dtype=float)
    if values.ndim == 2:
        return lambda n: values[n]
    if values.shape != (grid.n_nodes,):
        raise ConfigError(f"Control influence has shape {values.shape}, expected ({grid.n_nodes},)")
    return lambda n: values


def solve_adjoint_drier(jacobian, outlet_mismatch: TimeSeries, u0, grid, scheme="discrete", eta=None,
                        store=True):
    """Three-component adjoint -psi_t - u0 psi_x - J^T psi = 0 marched backward.

    Args:
        jacobian (JacobianField, array or callable): Frozen (N+1, 3, 3) Jacobian,
            or a callable n -> (N+1, 3, 3) assembled on the forward trajectory.
        outlet_mismatch (TimeSeries): T(l, t) - T_star.
        u0 (float): Conveyor speed.
        grid (SpaceTimeGrid): Forward grid.
        scheme (str): "discrete" or "continuous".
        eta (ScalarField, array or callable, optional): Control influence; when
            given the search direction is accumulated during the sweep.
        store (bool): Keep psi at every time sample.

    Returns:
        AdjointTrajectory
    """
    source = _as_jacobian_source(jacobian)

    def coupling(n, f):
        return np.einsum("iba,bi->ai", source(n), f)

    return _backward_sweep(grid, u0, outlet_mismatch, coupling, 3, scheme,
                           _as_influence_source(eta, grid), store)


def gradient_drier(adjoint: AdjointTrajectory, eta):
    """Search direction d(t) = int_0^l psi_T eta dx.

    `eta` is a field (linear control) or a per-time-sample array or callable
    (nonlinear control).
    """
    grid = adjoint.grid
    if adjoint.psi is None:
        if adjoint.direction is None:
            raise ConfigError("Adjoint sweep kept neither multipliers nor a search direction")
        return TimeSeries(adjoint.direction, grid)
    influence = _as_influence_source(eta, grid)
    weights = grid.space_weights()
    values = np.array([np.dot(weights, adjoint.psi_T[n] * influence(n)) for n in range(grid.n_steps + 1)])
    return TimeSeries(values, grid)


class Evaluation(NamedTuple):
    cost: float
    direction: np.ndarray
    result: object


@dataclass(frozen=True)
class ControlProblem:
    """Forward model, outlet extraction, adjoint and search direction of one tracking problem."""

    name: str
    grid: object
    t_star: float
    kind: ControlKind
    forward: Callable
    outlet: Callable
    adjoint: Callable
    gradient: Callable

    @property
    def cost_scale(self):
        return max(self.t_star ** 2, 1.0) * self.grid.horizon

    def signal(self, values, kind=None):
        return ControlSignal.from_values(values, self.grid, kind or self.kind)

    def outlet_series(self, result):
        return TimeSeries(self.outlet(result), self.grid)

    def cost(self, q):
        return cost(self.outlet_series(self.forward(q)), self.t_star)

    def evaluate(self, q):
        """Forward run, cost, adjoint sweep and search direction d for control q."""
        result = self.forward(q)
        value = cost(self.outlet_series(result), self.t_star)
        adjoint = self.adjoint(result, q)
        direction = self.gradient(adjoint, result, q)
        return Evaluation(value, np.asarray(direction.values), result)


def simple_control_problem(params, grid, scheme="discrete"):
    grid = grid.validated(params.u0)
    return ControlProblem(
        name="simple",
        grid=grid,
        t_star=params.t_star,
        kind=ControlKind.SURROUNDINGS_TEMPERATURE,
        forward=lambda q: solve_forward(params, q, grid),
        outlet=lambda trajectory: trajectory.temperature[:, -1],
        adjoint=lambda trajectory, q: solve_adjoint_simple(params, trajectory.outlet, grid, scheme, store=False),
        gradient=lambda adjoint, trajectory, q: gradient_simple(adjoint, params),
    )


def linear_control_problem(equilibrium, params, inlet, grid, scheme="discrete"):
    """Linearised drier with the Jacobian frozen on the equilibrium; the target perturbation is zero."""
    grid = grid.validated(params.u0)
    jacobian = equilibrium_jacobian(equilibrium, params).matrices
    eta = equilibrium_influence(equilibrium, params)

    def adjoint(trajectory, q):
        mismatch = TimeSeries(trajectory.outlet[:, TEMPERATURE], grid)
        return solve_adjoint_drier(jacobian, mismatch, params.u0, grid, scheme, eta=eta, store=False)

    return ControlProblem(
        name="linear-drier",
        grid=grid,
        t_star=0.0,
        kind=ControlKind.HEAT_DENSITY_PERTURBATION,
        forward=lambda q: solve_forward_linear(equilibrium, params, inlet, q, grid, warn_nonlinear=False),
        outlet=lambda trajectory: trajectory.outlet[:, TEMPERATURE],
        adjoint=adjoint,
        gradient=lambda adj, trajectory, q: gradient_drier(adj, eta),
    )


def nonlinear_control_problem(params, inlet, grid, t_star, initial=None, scheme="discrete", dump_path=None):
    """Nonlinear drier; Jacobians and eta are assembled per time slice from the stored trajectory.

    With `dump_path` the forward trajectory is written to a binary dump and
    replayed from disk during the adjoint sweep.
    """
    grid = grid.validated(params.u0)
    if initial is None:
        initial = solve_equilibrium(params, grid, method="discrete")

    def forward(q):
        return solve_forward_nonlinear(params, q, inlet, grid, initial=initial, store=dump_path is None,
                                       dump_path=dump_path)

    def adjoint(trajectory, q):
        qdot = control_values(q, grid)

        def jacobian(n):
            s = trajectory.state(n)
            return assemble_jacobian(s[0], s[1], s[2], qdot[n], params)

        def eta(n):
            s = trajectory.state(n)
            return control_influence(s[0], s[1], params)

        mismatch = TimeSeries(trajectory.outlet[:, TEMPERATURE] - t_star, grid)
        return solve_adjoint_drier(jacobian, mismatch, params.u0, grid, scheme, eta=eta, store=False)

    return ControlProblem(
        name="nonlinear-drier",
        grid=grid,
        t_star=float(t_star),
        kind=ControlKind.HEAT_DENSITY,
        forward=forward,
        outlet=lambda trajectory: trajectory.outlet[:, TEMPERATURE],
        adjoint=adjoint,
        gradient=lambda adj, trajectory, q: gradient_drier(adj, None),
    )


@dataclass
class DescentTrace:
    """One row per cost evaluation; row 0 is the initial guess."""

    costs: List[float] = field(default_factory=list)
    steps: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    wall_ms: List[float] = field(default_factory=list)
    stop_reason: Optional[str] = None
    best_iteration: int = 0

    def record(self, cost_value, step, grad_norm, wall_ms):
        self.costs.append(float(cost_value))
        self.steps.append(float(step))
        self.grad_norms.append(float(grad_norm))
        self.wall_ms.append(float(wall_ms))

    def __len__(self):
        return len(self.costs)

    @property
    def iterations(self):
        return max(len(self.costs) - 1, 0)

    @property
    def initial_cost(self):
        return self.costs[0]

    @property
    def final_cost(self):
        return self.costs[self.best_iteration]

    @property
    def spikes(self):
        """Number of iterations where the cost went up."""
        return int(np.sum(np.diff(self.costs) > 0)) if len(self.costs) > 1 else 0

    def rows(self):
        return [(k, self.costs[k], self.steps[k], self.grad_norms[k], self.wall_ms[k]) for k in range(len(self))]


class DescentResult(NamedTuple):
    control: ControlSignal
    trace: DescentTrace


def barzilai_borwein(evaluate, x0, grid, max_iters=1000, tol_cost=0.0, tol_grad=1e-8, initial_step=1e-3,
                     log_every=0, progress=False, label="BB"):
    """Steepest descent x_{k+1} = x_k - alpha_k G(x_k) with the secant step size.

    alpha_k = <s, s> / <s, y> with s = x_k - x_{k-1} and y = G_k - G_{k-1}, both in
    the trapezoid L2 product on the time grid. The first step, and any step where
    <s, y> <= 0, is the fixed step initial_step * (|x| or 1) / |G_0|.

    Args:
        evaluate (callable): x -> (J, G), cost and L2 gradient at x.
        x0 (numpy.ndarray): Initial iterate on the time grid.
        grid (SpaceTimeGrid): Time grid defining the inner product.
        max_iters (int): Iteration budget.
        tol_cost (float): Stop once J <= tol_cost.
        tol_grad (float): Stop once |G_k| <= tol_grad * |G_0|.

    Returns:
        tuple: (best iterate, DescentTrace)

    Raises:
        DivergenceError: If the cost or gradient stops being finite; the partial
            trace is attached.
    """
    if int(max_iters) < 1:
        raise ConfigError(f"max_iters must be at least 1, got {max_iters}")
    trace = DescentTrace()

    def run(x):
        started = time.perf_counter()
        try:
            value, gradient = evaluate(x)
        except DivergenceError as e:
            raise DivergenceError(f"{label} descent diverged at iteration {len(trace)}: {e}",
                                  step=getattr(e, "step", None), trace=trace) from e
        gradient = np.asarray(gradient, dtype=float)
        if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
            raise DivergenceError(f"{label} descent produced a non-finite cost at iteration {len(trace)}",
                                  trace=trace)
        return float(value), gradient, (time.perf_counter() - started) * 1e3

    x = np.array(x0, dtype=float)
    value, gradient, elapsed = run(x)
    g0 = norm_time(gradient, grid)
    trace.record(value, 0.0, g0, elapsed)
    best_x, best_value = x.copy(), value
    fixed_step = initial_step * (norm_time(x, grid) or 1.0) / g0 if g0 > 0 else 0.0
    previous = None

    with tqdm(total=int(max_iters), desc=label, disable=not progress) as bar:
        while True:
            g_norm = trace.grad_norms[-1]
            if value <= tol_cost:
                trace.stop_reason = "cost_tolerance"
                break
            if g_norm <= tol_grad * g0:
                trace.stop_reason = "gradient_tolerance"
                break
            if trace.iterations >= max_iters:
                trace.stop_reason = "max_iters"
                break

            step = fixed_step
            if previous is not None:
                s = x - previous[0]
                y = gradient - previous[1]
                curvature = inner_product_time(s, y, grid)
                if curvature > 0 and np.isfinite(curvature):
                    step = inner_product_time(s, s, grid) / curvature
                else:
                    Logger.log(f"{TAG} Non-positive secant curvature at iteration {trace.iterations}; "
                               f"falling back to the fixed step {fixed_step:.3e}", "WARNING")

            previous = (x, gradient)
            x = x - step * gradient
            value, gradient, elapsed = run(x)
            trace.record(value, step, norm_time(gradient, grid), elapsed)
            if value < best_value:
                best_x, best_value = x.copy(), value
                trace.best_iteration = trace.iterations
            bar.update(1)
            if log_every and trace.iterations % log_every == 0:
                Logger.log(f"{TAG} {label} iteration {trace.iterations}: J={value:.6e}, "
                           f"alpha={step:.3e}, |G|={trace.grad_norms[-1]:.3e}", "INFO")

    Logger.log(f"{TAG} {label} stopped after {trace.iterations} iterations ({trace.stop_reason}), "
               f"J={best_value:.6e}", "DEBUG")
    return best_x, trace


def _settings(problem, tol_cost):
    return 1e-10 * problem.cost_scale if tol_cost is None else float(tol_cost)


def bb_descent(problem: ControlProblem, q0, max_iters=1000, tol_cost=None, tol_grad=1e-8, initial_step=1e-3,
               log_every=0, progress=False):
    """Minimise the tracking cost of `problem` starting from q0.

    Returns:
        DescentResult: The lowest-cost control found and the descent trace.
    """
    problem.grid.require_same_time(q0.grid)

    def evaluate(x):
        ev = problem.evaluate(problem.signal(x))
        return ev.cost, -ev.direction

    best, trace = barzilai_borwein(evaluate, q0.values, problem.grid, max_iters, _settings(problem, tol_cost),
                                   tol_grad, initial_step, log_every, progress, label=problem.name)
    return DescentResult(problem.signal(best), trace)


def theta_from_control(q):
    """theta = sqrt(2 q) for a nonnegative control; negative samples map to zero."""
    return np.sqrt(2.0 * np.maximum(np.asarray(q.values, dtype=float), 0.0))


def bb_descent_nonneg(problem: ControlProblem, theta0, max_iters=1000, tol_cost=None, tol_grad=1e-8,
                      initial_step=1e-3, log_every=0, progress=False):
    """Descent on theta with q = theta^2 / 2, so the control stays nonnegative.

    The theta gradient is theta(t) times the q gradient.

    Returns:
        DescentResult: Control of kind squared-parametrization; its `induced`
        values are the heating and are >= 0 at every sample.
    """
    problem.grid.require_same_time(theta0.grid)
    squared = ControlKind.SQUARED_PARAMETRIZATION

    def evaluate(theta):
        ev = problem.evaluate(problem.signal(theta, squared))
        return ev.cost, -theta * ev.direction

    best, trace = barzilai_borwein(evaluate, theta0.values, problem.grid, max_iters,
                                   _settings(problem, tol_cost), tol_grad, initial_step, log_every, progress,
                                   label=f"{problem.name} (q >= 0)")
    return DescentResult(problem.signal(best, squared), trace)
