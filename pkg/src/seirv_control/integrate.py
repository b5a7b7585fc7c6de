"""Fixed-step RK4 on a uniform grid, forward for states and backward for costates."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import STATE_NAMES, ModelParams, adjoint_kernel, rate_coefficients, state_kernel

NEGATIVITY_TOL = 1e-6


class IntegrationError(ArithmeticError):
    """A trajectory left the admissible region (negative compartment or NaN)."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ValueError(f"t_end must exceed t0, got [{self.t0}, {self.t_end}]")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"dt={self.dt} is larger than the interval")

    @classmethod
    def for_horizon(cls, horizon_days: float, dt: float = 0.1) -> "TimeGrid":
        return cls(0.0, float(horizon_days), float(dt))

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))

    @property
    def step(self) -> float:
        """Actual step, ``(t_end - t0) / n_steps``; equals ``dt`` when it divides the interval."""
        return (self.t_end - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One stored point per grid node; ``values`` has shape ``(len(grid), dim)``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != len(self.grid):
            raise GridMismatchError(
                f"expected {len(self.grid)} nodes, got array of shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: TimeGrid, point: Sequence[float]) -> "Trajectory":
        return cls(grid, np.tile(np.asarray(point, dtype=float), (len(grid), 1)))

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, k):
        return self.values[k]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation; exact at grid nodes."""
        pos = (t - self.grid.t0) / self.grid.step
        if pos < -1e-9 or pos > self.grid.n_steps + 1e-9:
            raise ValueError(f"t={t} outside [{self.grid.t0}, {self.grid.t_end}]")
        k = min(max(int(np.floor(pos)), 0), self.grid.n_steps)
        frac = pos - k
        if k == self.grid.n_steps or frac == 0.0:
            return self.values[k].copy()
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]


StateTrajectory = Trajectory
AdjointTrajectory = Trajectory
ControlSchedule = Trajectory


def _check_grid(grid: TimeGrid, *trajectories: Trajectory) -> None:
    for traj in trajectories:
        if traj.grid != grid or len(traj) != len(grid):
            raise GridMismatchError(f"trajectory grid {traj.grid} does not match {grid}")


def rk4_step(f: Callable, y: tuple, h: float, start: tuple, mid: tuple, end: tuple) -> tuple:
    """One classical RK4 step of ``y' = f(*y, *args)`` on float tuples.

    ``start``, ``mid`` and ``end`` are the extra arguments valid at the
    beginning, half-way point and end of the step.  A negative ``h`` steps
    backwards in time.
    """
    hh = 0.5 * h
    k1 = f(*y, *start)
    k2 = f(*[a + hh * d for a, d in zip(y, k1)], *mid)
    k3 = f(*[a + hh * d for a, d in zip(y, k2)], *mid)
    k4 = f(*[a + h * d for a, d in zip(y, k3)], *end)
    h6 = h / 6.0
    return tuple(
        a + h6 * (d1 + 2.0 * d2 + 2.0 * d3 + d4) for a, d1, d2, d3, d4 in zip(y, k1, k2, k3, k4)
    )


def _check_state(y: tuple, t: float, neg_tol: float) -> None:
    if not all(math.isfinite(v) for v in y):
        raise IntegrationError(f"non-finite state at t={t:.6g}", t)
    n = sum(y)
    low = min(y)
    if low < -neg_tol * abs(n):
        j = y.index(low)
        raise IntegrationError(
            f"{STATE_NAMES[j]} = {low:.6g} below tolerance at t={t:.6g} (N = {n:.6g})", t
        )


def integrate_forward(
    x0: Sequence[float],
    controls: ControlSchedule,
    p: ModelParams,
    grid: TimeGrid,
    neg_tol: float = NEGATIVITY_TOL,
) -> StateTrajectory:
    """Integrate the state system from ``x0`` at ``grid.t0`` to ``grid.t_end``.

    Controls are piecewise linear between nodes, so the half-step stages use
    the average of the two bracketing nodes.
    """
    _check_grid(grid, controls)
    y = tuple(float(v) for v in x0)
    if len(y) != 6:
        raise ValueError(f"initial state must have 6 components, got {len(y)}")
    h = grid.step
    c = rate_coefficients(p)
    u = controls.values.tolist()
    _check_state(y, grid.t0, neg_tol)
    out = [y]
    for k in range(grid.n_steps):
        ua, ub = u[k], u[k + 1]
        mid = (0.5 * (ua[0] + ub[0]), 0.5 * (ua[1] + ub[1]), c)
        y = rk4_step(state_kernel, y, h, (ua[0], ua[1], c), mid, (ub[0], ub[1], c))
        _check_state(y, grid.t0 + (k + 1) * h, neg_tol)
        out.append(y)
    return Trajectory(grid, np.array(out))


def integrate_backward(
    lam_T: Sequence[float],
    states: StateTrajectory,
    controls: ControlSchedule,
    p: ModelParams,
    grid: TimeGrid,
) -> AdjointTrajectory:
    """Integrate the costate system from ``lam_T`` at ``grid.t_end`` back to ``grid.t0``.

    States and controls at the half-step stages are linear interpolants of the
    stored nodes.
    """
    _check_grid(grid, states, controls)
    lam = tuple(float(v) for v in lam_T)
    if len(lam) != 6:
        raise ValueError(f"terminal costate must have 6 components, got {len(lam)}")
    h = grid.step
    c = rate_coefficients(p)
    x = states.values.tolist()
    u = controls.values.tolist()
    out = [lam]
    for k in range(grid.n_steps, 0, -1):
        xa, xb = x[k], x[k - 1]
        ua, ub = u[k], u[k - 1]
        x_mid = [0.5 * (a + b) for a, b in zip(xa, xb)]
        mid = (*x_mid, 0.5 * (ua[0] + ub[0]), 0.5 * (ua[1] + ub[1]), c)
        lam = rk4_step(adjoint_kernel, lam, -h, (*xa, *ua, c), mid, (*xb, *ub, c))
        if not all(math.isfinite(v) for v in lam):
            t = grid.t0 + (k - 1) * h
            raise IntegrationError(f"non-finite costate at t={t:.6g}", t)
        out.append(lam)
    out.reverse()
    return Trajectory(grid, np.array(out))


def trapezoid(values: Sequence[float], dt: float) -> float:
    """Composite trapezoidal rule on a uniform grid with spacing ``dt``."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError(f"need a 1-D sequence of at least 2 values, got shape {y.shape}")
    return float(dt * (y.sum() - 0.5 * (y[0] + y[-1])))
