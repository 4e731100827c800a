"""Fixed-step classical RK4 on uniform grids, forward and backward in time."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from siqrb.model import ControlSignal

log = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-9


class IntegrationError(RuntimeError):
    pass


class NonFiniteState(IntegrationError):
    pass


class GridMismatch(IntegrationError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not self.t_final > self.t0:
            raise ValueError(f"t_final ({self.t_final}) must exceed t0 ({self.t0})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_step(cls, t0: float, t_final: float, h: float) -> "TimeGrid":
        """Grid whose spacing is as close to ``h`` as an integer step count allows."""
        if h <= 0:
            raise ValueError(f"step must be > 0, got {h!r}")
        return cls(t0, t_final, max(1, int(round((t_final - t0) / h))))

    @property
    def h(self) -> float:
        return (self.t_final - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t_final, self.n_steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t_final, self.n_steps * factor)


@dataclass(frozen=True)
class Trajectory:
    """Grid plus one row of values per grid point.

    ``max_clamped`` is the largest negative excursion that was clamped to
    zero during integration (0.0 when clamping was off or never needed).
    """

    grid: TimeGrid
    states: np.ndarray
    max_clamped: float = 0.0

    def __post_init__(self):
        if self.states.shape[0] != self.grid.n_steps + 1:
            raise GridMismatch(
                f"trajectory has {self.states.shape[0]} rows for a grid of {self.grid.n_steps + 1} points")

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def column(self, index: int) -> np.ndarray:
        return self.states[:, index]

    def at(self, t: float) -> np.ndarray:
        """Componentwise linear interpolation at time ``t``."""
        times = self.times
        return np.array([np.interp(t, times, self.states[:, i]) for i in range(self.states.shape[1])])


def _check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"non-finite state {x!r} at t={t:g}; step size too large?")


def _check_aligned(grid: TimeGrid, *arrays_and_names) -> None:
    n = grid.n_steps + 1
    for name, length in arrays_and_names:
        if length != n:
            raise GridMismatch(f"{name} has {length} points, grid has {n}")


def _check_control_grid(control: ControlSignal, grid: TimeGrid) -> None:
    _check_aligned(grid, ("control", control.values.shape[0]))
    if not np.allclose(control.times, grid.times, rtol=0.0, atol=1e-9 * max(1.0, abs(grid.t_final))):
        raise GridMismatch("control is defined on a different time grid")


def integrate_forward(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0,
    grid: TimeGrid,
    *,
    clamp_nonnegative: bool = False,
) -> Trajectory:
    """Integrate ``x' = rhs(t, x)`` from ``grid.t0`` with classical RK4.

    With ``clamp_nonnegative`` each step's result is clipped at zero; undershoots
    larger than ``NEGATIVE_TOLERANCE`` are logged as warnings.
    """
    h = grid.h
    t0 = grid.t0
    n = grid.n_steps
    x = np.array(x0, dtype=float)
    out = np.empty((n + 1, x.size))
    out[0] = x
    worst = 0.0
    for k in range(n):
        t = t0 + k * h
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(x, t + h)
        if clamp_nonnegative:
            low = x.min()
            if low < 0.0:
                worst = min(worst, low)
                if low < -NEGATIVE_TOLERANCE:
                    log.warning("clamped negative state component %.3e at t=%g", low, t + h)
                x = np.maximum(x, 0.0)
        out[k + 1] = x
    return Trajectory(grid, out, max_clamped=-worst)


def integrate_backward(
    rhs: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
    l_terminal,
    state_traj: Trajectory,
    control: ControlSignal,
    grid: TimeGrid,
) -> Trajectory:
    """Integrate ``l' = rhs(l, x(t), u(t))`` backward from ``grid.t_final``.

    State and control at the RK4 half-step stages are linear interpolants
    between the neighbouring grid values.
    """
    if state_traj.grid != grid:
        raise GridMismatch("state trajectory is defined on a different time grid")
    _check_control_grid(control, grid)
    h = grid.h
    n = grid.n_steps
    X = state_traj.states
    U = control.values
    lam = np.array(l_terminal, dtype=float)
    out = np.empty((n + 1, lam.size))
    out[n] = lam
    for k in range(n, 0, -1):
        x_hi, x_lo = X[k], X[k - 1]
        u_hi, u_lo = U[k], U[k - 1]
        x_mid = 0.5 * (x_hi + x_lo)
        u_mid = 0.5 * (u_hi + u_lo)
        k1 = rhs(lam, x_hi, u_hi)
        k2 = rhs(lam - 0.5 * h * k1, x_mid, u_mid)
        k3 = rhs(lam - 0.5 * h * k2, x_mid, u_mid)
        k4 = rhs(lam - h * k3, x_lo, u_lo)
        lam = lam - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(lam, grid.t0 + (k - 1) * h)
        out[k - 1] = lam
    return Trajectory(grid, out)


def simpson(values: np.ndarray, h: float) -> float:
    """Composite Simpson rule on a uniform grid; trapezoid on a trailing odd panel."""
    y = np.asarray(values, dtype=float)
    n = y.size - 1
    if n < 1:
        return 0.0
    m = n - (n % 2)
    total = 0.0
    if m >= 2:
        total = (h / 3.0) * (y[0] + y[m] + 4.0 * y[1:m:2].sum() + 2.0 * y[2:m - 1:2].sum())
    if m != n:
        total += 0.5 * h * (y[n - 1] + y[n])
    return float(total)


def total_cost(traj: Trajectory, control: ControlSignal, W: float) -> float:
    """Quadrature of ``I + B + (W/2) u^2`` over the trajectory's grid."""
    _check_control_grid(control, traj.grid)
    integrand = traj.states[:, 1] + traj.states[:, 4] + 0.5 * W * control.values ** 2
    return simpson(integrand, traj.grid.h)
