"""Forward-backward sweep for the two-vaccine control problem."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integrate import (
    AdjointTrajectory,
    ControlSchedule,
    StateTrajectory,
    TimeGrid,
    Trajectory,
    integrate_backward,
    integrate_forward,
    trapezoid,
)
from .model import I, S, V1, V2, ModelParams

log = logging.getLogger(__name__)

ABS_FALLBACK = 1e-12


@dataclass(frozen=True)
class SweepConfig:
    max_iterations: int = 500
    convergence_tol: float = 1e-5
    relaxation: float = 0.5
    initial_guess: ControlSchedule | None = None  # None means u == 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be > 0, got {self.convergence_tol}")
        if not 0 < self.relaxation <= 1:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation}")


@dataclass(frozen=True, eq=False)
class SweepResult:
    states: StateTrajectory
    adjoints: AdjointTrajectory
    controls: ControlSchedule
    objective: float
    iterations: int
    converged: bool
    # per-iteration relative L1 change of (u1, u2)
    history: tuple = field(default=(), repr=False)

    @property
    def grid(self) -> TimeGrid:
        return self.states.grid


def optimality_update(
    states: StateTrajectory, adjoints: AdjointTrajectory, p: ModelParams
) -> ControlSchedule:
    """Pointwise minimiser of the Hamiltonian in ``u``, clipped to ``[0, 1]``."""
    if states.grid != adjoints.grid:
        raise ValueError("states and adjoints are on different grids")
    s = states.column(S)
    lam = adjoints.values
    u1 = s * (lam[:, S] - lam[:, V1]) / (2.0 * p.b1)
    u2 = s * (lam[:, S] - lam[:, V2]) / (2.0 * p.b2)
    return Trajectory(states.grid, np.clip(np.column_stack([u1, u2]), 0.0, 1.0))


def evaluate_objective(states: StateTrajectory, controls: ControlSchedule, p: ModelParams) -> float:
    """Cost functional: trapezoid of ``I + B1 u1^2 + B2 u2^2`` over the grid."""
    if states.grid != controls.grid:
        raise ValueError("states and controls are on different grids")
    u = controls.values
    running = states.column(I) + p.b1 * u[:, 0] ** 2 + p.b2 * u[:, 1] ** 2
    return trapezoid(running, states.grid.step)


def zero_controls(grid: TimeGrid) -> ControlSchedule:
    return Trajectory(grid, np.zeros((len(grid), 2)))


def _relative_change(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    diff = np.abs(new - old).sum(axis=0)
    size = np.abs(new).sum(axis=0)
    return np.where(size < ABS_FALLBACK, diff, diff / np.where(size < ABS_FALLBACK, 1.0, size))


def _solve_pass(x0, controls, p, grid):
    states = integrate_forward(x0, controls, p, grid)
    adjoints = integrate_backward(np.zeros(6), states, controls, p, grid)
    return states, adjoints


def run_sweep(
    x0: Sequence[float],
    p: ModelParams,
    grid: TimeGrid,
    cfg: SweepConfig | None = None,
    forced_zero: Sequence[int] = (),
) -> SweepResult:
    """Iterate forward pass, backward pass and relaxed control update.

    ``forced_zero`` lists control indices (0 for u1, 1 for u2) pinned to zero
    on every iteration; the remaining controls are still optimised.

    On convergence the clipped candidate from the last pass replaces the
    relaxed iterate (the relaxation only approaches a saturated bound
    geometrically) and the trajectories are recomputed for it, so the
    returned states, adjoints, controls and objective are mutually
    consistent.  Non-convergence is reported through ``converged=False``.
    """
    cfg = cfg or SweepConfig()
    forced = sorted(set(forced_zero))
    if any(j not in (0, 1) for j in forced):
        raise ValueError(f"forced_zero entries must be 0 or 1, got {forced_zero}")

    if cfg.initial_guess is None:
        u = np.zeros((len(grid), 2))
    else:
        if cfg.initial_guess.grid != grid:
            raise ValueError("initial guess is not on the sweep grid")
        u = np.clip(cfg.initial_guess.values, 0.0, 1.0).copy()
    u[:, forced] = 0.0

    w = cfg.relaxation
    history = []
    converged = False
    iterations = 0
    candidate = None
    for iterations in range(1, cfg.max_iterations + 1):
        states, adjoints = _solve_pass(x0, Trajectory(grid, u), p, grid)
        candidate = optimality_update(states, adjoints, p).values.copy()
        candidate[:, forced] = 0.0
        new = w * candidate + (1.0 - w) * u
        change = _relative_change(new, u)
        history.append(tuple(float(c) for c in change))
        u = new
        if np.all(change <= cfg.convergence_tol):
            converged = True
            break
    else:
        log.warning("sweep did not converge in %d iterations (last change %s)",
                    cfg.max_iterations, history[-1])

    if converged:
        u = candidate
    controls = Trajectory(grid, u)
    states, adjoints = _solve_pass(x0, controls, p, grid)
    return SweepResult(
        states=states,
        adjoints=adjoints,
        controls=controls,
        objective=evaluate_objective(states, controls, p),
        iterations=iterations,
        converged=converged,
        history=tuple(history),
    )


def uncontrolled_run(x0: Sequence[float], p: ModelParams, grid: TimeGrid) -> SweepResult:
    """Single forward/backward pass with ``u == 0``; reported as converged."""
    controls = zero_controls(grid)
    states, adjoints = _solve_pass(x0, controls, p, grid)
    return SweepResult(states, adjoints, controls, evaluate_objective(states, controls, p), 0, True)
