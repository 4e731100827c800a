"""Optimal quarantine policy by forward-backward sweep.

The cost is ``J = int_0^T I + B + (W/2) u^2 dt``; the control ``u`` in [0, 1]
scales the quarantine rate. Each sweep integrates the controlled state
forward, the costates backward from zero terminal values, and moves the
control towards the pointwise Hamiltonian minimizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from siqrb.integrator import TimeGrid, Trajectory, integrate_backward, integrate_forward, simpson, total_cost
from siqrb.model import (
    ControlSignal,
    ModelParams,
    NonPositiveWeight,
    ValidatedParams,
    adjoint_rhs,
    controlled_rhs,
    validate_params,
)

log = logging.getLogger(__name__)


class NotConverged(RuntimeError):
    def __init__(self, solution: "OcpSolution"):
        self.solution = solution
        last = solution.history[-1][1] if solution.history else float("nan")
        super().__init__(f"sweep did not converge in {solution.iterations} iterations (last change {last:.3e})")


class ProjectionActive(ValueError):
    pass


@dataclass(frozen=True)
class OcpConfig:
    params: ValidatedParams
    x0: np.ndarray
    W: float
    grid: TimeGrid
    sweep_tolerance: float = 1e-4
    max_iterations: int = 500
    relaxation: float = 0.5
    initial_control: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "params", validate_params(self.params))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if not self.W > 0:
            raise NonPositiveWeight(f"cost weight W must be > 0, got {self.W!r}")
        if not self.sweep_tolerance > 0:
            raise ValueError("sweep_tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if not 0 <= self.initial_control <= 1:
            raise ValueError("initial_control must lie in [0, 1]")


@dataclass
class OcpSolution:
    control: ControlSignal
    state_traj: Trajectory
    adjoint_traj: Trajectory
    cost: float
    iterations: int
    converged: bool
    history: list[tuple[float, float]] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.state_traj.times

    def switching_time(self, threshold: float = 0.999) -> float | None:
        """Last grid time at which the control still exceeds ``threshold``."""
        above = np.nonzero(self.control.values > threshold)[0]
        return float(self.times[above[-1]]) if above.size else None


def control_update(x, l, params: ModelParams, W: float) -> float:
    """Pointwise minimizer of the Hamiltonian over u in [0, 1]."""
    return min(max(0.0, params.delta * x[1] * (l[1] - l[2]) / W), 1.0)


def _control_law(states: np.ndarray, adjoints: np.ndarray, params: ModelParams, W: float) -> np.ndarray:
    return np.clip(params.delta * states[:, 1] * (adjoints[:, 1] - adjoints[:, 2]) / W, 0.0, 1.0)


def simulate_controlled(params: ModelParams, x0, control: ControlSignal, grid: TimeGrid) -> Trajectory:
    p = validate_params(params)
    return integrate_forward(lambda t, x: controlled_rhs(x, control.at(t), p), x0, grid, clamp_nonnegative=True)


def solve_adjoint(params: ModelParams, state_traj: Trajectory, control: ControlSignal) -> Trajectory:
    p = validate_params(params)
    return integrate_backward(lambda l, x, u: adjoint_rhs(l, x, u, p), np.zeros(5), state_traj, control, state_traj.grid)


def evaluate_cost(config: OcpConfig, control: ControlSignal) -> float:
    traj = simulate_controlled(config.params, config.x0, control, config.grid)
    return total_cost(traj, control, config.W)


def forward_backward_sweep(config: OcpConfig, *, strict: bool = False) -> OcpSolution:
    """Iterate state sweep, costate sweep and relaxed control update to a fixed point.

    Stops once the max-norm control change is at most
    ``sweep_tolerance * max(1, max|u|)``. A non-converged solution is returned
    with ``converged=False`` unless ``strict`` is set, in which case
    :class:`NotConverged` is raised carrying it.
    """
    p = config.params
    grid = config.grid
    times = grid.times
    u = np.full(times.shape, config.initial_control)
    history: list[tuple[float, float]] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        control = ControlSignal(times, u)
        traj = simulate_controlled(p, config.x0, control, grid)
        adj = solve_adjoint(p, traj, control)
        target = _control_law(traj.states, adj.states, p, config.W)
        u_new = np.clip(config.relaxation * target + (1.0 - config.relaxation) * u, 0.0, 1.0)
        change = float(np.max(np.abs(u_new - u)))
        history.append((total_cost(traj, control, config.W), change))
        log.debug("sweep %d: J=%.10g change=%.3e", iterations, history[-1][0], change)
        u = u_new
        if change <= config.sweep_tolerance * max(1.0, float(np.max(np.abs(u)))):
            converged = True
            break

    control = ControlSignal(times, u)
    traj = simulate_controlled(p, config.x0, control, grid)
    adj = solve_adjoint(p, traj, control)
    solution = OcpSolution(control, traj, adj, total_cost(traj, control, config.W), iterations, converged, history)
    if not converged:
        log.warning("forward-backward sweep stopped after %d iterations without converging", iterations)
        if strict:
            raise NotConverged(solution)
    return solution


@dataclass(frozen=True)
class GradientCheck:
    analytic: float
    numeric: float

    @property
    def relative_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale == 0 else abs(self.analytic - self.numeric) / scale


def reduced_gradient(config: OcpConfig, control: ControlSignal) -> tuple[np.ndarray, Trajectory, Trajectory]:
    """Pointwise ``dH/du = W u - delta I (l2 - l3)`` along the state and costate of ``control``."""
    traj = simulate_controlled(config.params, config.x0, control, config.grid)
    adj = solve_adjoint(config.params, traj, control)
    X, L = traj.states, adj.states
    grad = config.W * control.values - config.params.delta * X[:, 1] * (L[:, 1] - L[:, 2])
    return grad, traj, adj


def cost_gradient_check(
    config: OcpConfig,
    u: ControlSignal,
    direction: np.ndarray | Callable[[np.ndarray], np.ndarray],
    eps: float = 1e-5,
) -> GradientCheck:
    """Directional derivative of J from the costates versus a central difference.

    Raises:
        ProjectionActive: ``u`` is not inside (0.01, 0.99) wherever the
            direction is nonzero, so the box constraint could interfere.
    """
    times = config.grid.times
    dirv = np.asarray(direction(times) if callable(direction) else direction, dtype=float)
    if dirv.shape != times.shape:
        raise ValueError("direction must have one value per grid point")
    support = dirv != 0.0
    if not support.any():
        return GradientCheck(0.0, 0.0)
    inside = (u.values > 0.01) & (u.values < 0.99)
    if not inside[support].all() or np.any(np.abs(eps * dirv) >= 0.01):
        raise ProjectionActive("control touches the bounds on the perturbation support")

    grad, _, _ = reduced_gradient(config, u)
    analytic = simpson(grad * dirv, config.grid.h)
    j_plus = evaluate_cost(config, ControlSignal(times, u.values + eps * dirv))
    j_minus = evaluate_cost(config, ControlSignal(times, u.values - eps * dirv))
    return GradientCheck(analytic, (j_plus - j_minus) / (2.0 * eps))
