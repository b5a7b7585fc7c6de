"""Scenario studies on top of the sweep: procurement splits, control-shape
classification, parameter sensitivity grids and single-vaccine comparisons."""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .integrate import ControlSchedule, TimeGrid, trapezoid
from .model import COST_SCALE, I, S, V1, V2, ModelParams, StatePoint, default_initial_state
from .sweep import SweepConfig, SweepResult, run_sweep, uncontrolled_run

V1_ONLY = "V1-only"
SIMULTANEOUS = "simultaneous-throughout"
V1_THEN_SIMULTANEOUS = "V1-then-simultaneous"
OTHER = "other"
SHAPES = (V1_ONLY, SIMULTANEOUS, V1_THEN_SIMULTANEOUS, OTHER)

ACTIVITY_THRESHOLD = 0.05
SIMULTANEOUS_FRACTION = 0.95

EFFICACY_PAIRS = (
    (0.91, 0.51), (0.74, 0.51), (0.67, 0.51),
    (0.91, 0.74), (0.91, 0.67), (0.74, 0.67),
)
HORIZONS = (60.0, 120.0, 180.0)


class UndefinedSplitError(ValueError):
    """Neither vaccinated compartment was ever populated."""


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    x0: StatePoint = field(default_factory=default_initial_state)
    grid: TimeGrid | None = None
    sweep_cfg: SweepConfig = field(default_factory=SweepConfig)
    label: str = ""

    def __post_init__(self):
        if self.grid is None:
            object.__setattr__(self, "grid", TimeGrid.for_horizon(self.params.horizon_days))
        if abs(self.grid.t_end - self.grid.t0 - self.params.horizon_days) > 1e-9:
            raise ValueError(
                f"grid spans {self.grid.t_end - self.grid.t0} days but horizon is "
                f"{self.params.horizon_days}"
            )
        if not self.label:
            p = self.params
            object.__setattr__(self, "label", f"{p.theta1:g}vs{p.theta2:g}_T{p.horizon_days:g}")

    def with_params(self, label: str = "", **changes) -> "Scenario":
        params = replace(self.params, **changes)
        grid = self.grid
        if "horizon_days" in changes:
            grid = TimeGrid(self.grid.t0, self.grid.t0 + params.horizon_days, self.grid.dt)
        return replace(self, params=params, grid=grid, label=label)

    def solve(self, forced_zero: Sequence[int] = ()) -> SweepResult:
        return run_sweep(self.x0, self.params, self.grid, self.sweep_cfg, forced_zero)


def reference_scenario(theta1: float, theta2: float, horizon_days: float = 60.0,
                       dt: float = 0.1, sweep_cfg: SweepConfig | None = None,
                       **overrides) -> Scenario:
    """Default rates and initial state, cost weights ``b_i = theta_i * 1e4``."""
    params = ModelParams(theta1=theta1, theta2=theta2, horizon_days=horizon_days, **overrides)
    return Scenario(params, grid=TimeGrid.for_horizon(horizon_days, dt),
                    sweep_cfg=sweep_cfg or SweepConfig())


@dataclass(frozen=True)
class ProcurementSplit:
    share_v1: float
    share_v2: float
    area_v1: float
    area_v2: float


def procurement_split(result: SweepResult) -> ProcurementSplit:
    """Percent shares of the time integrals of the two vaccinated compartments."""
    h = result.states.grid.step
    a1 = trapezoid(result.states.column(V1), h)
    a2 = trapezoid(result.states.column(V2), h)
    total = a1 + a2
    if not total > 0:
        raise UndefinedSplitError("no vaccination occurred; procurement split is undefined")
    share_v1 = 100.0 * a1 / total
    return ProcurementSplit(share_v1, 100.0 - share_v1, a1, a2)


@dataclass(frozen=True)
class ControlShape:
    tag: str
    crossover_day: float | None = None
    active_fraction_v1: float = 0.0
    active_fraction_v2: float = 0.0
    both_active_fraction: float = 0.0


def _active(u: np.ndarray, threshold: float) -> np.ndarray:
    peak = float(u.max())
    if peak <= 0:
        return np.zeros(u.shape, dtype=bool)
    return u > threshold * peak


def classify_control(controls: ControlSchedule,
                     activity_threshold: float = ACTIVITY_THRESHOLD) -> ControlShape:
    """Tag the qualitative shape of a converged schedule.

    A control is active at a node when it exceeds ``activity_threshold``
    times its own peak.  ``simultaneous-throughout`` needs both active on at
    least 95% of nodes, which tolerates the drop to zero forced near the end
    of the horizon.  The crossover day is the first node where u2 is active
    after an initial stretch of V1-only use.
    """
    u = controls.values
    act1 = _active(u[:, 0], activity_threshold)
    act2 = _active(u[:, 1], activity_threshold)
    both = float(np.mean(act1 & act2))
    fractions = dict(active_fraction_v1=float(act1.mean()), active_fraction_v2=float(act2.mean()),
                     both_active_fraction=both)
    if not act2.any():
        tag = V1_ONLY if act1.any() else OTHER
        return ControlShape(tag, None, **fractions)
    if both >= SIMULTANEOUS_FRACTION:
        return ControlShape(SIMULTANEOUS, None, **fractions)
    first2 = int(np.argmax(act2))
    if first2 > 0 and act1[0] and act1[first2]:
        return ControlShape(V1_THEN_SIMULTANEOUS, float(controls.times[first2]), **fractions)
    return ControlShape(OTHER, None, **fractions)


@dataclass(frozen=True, eq=False)
class SensitivityCell:
    label: str
    params: ModelParams
    result: SweepResult
    shape: ControlShape
    split: ProcurementSplit | None

    @property
    def classification(self) -> str:
        return self.shape.tag

    @property
    def converged(self) -> bool:
        return self.result.converged


def _solve_cell(args) -> SensitivityCell:
    label, scenario, threshold = args
    result = scenario.solve()
    try:
        split = procurement_split(result)
    except UndefinedSplitError:
        split = None
    return SensitivityCell(label, scenario.params, result,
                           classify_control(result.controls, threshold), split)


def solve_cells(cells: Iterable[tuple[str, Scenario]], parallelism: int = 1,
                activity_threshold: float = ACTIVITY_THRESHOLD) -> list[SensitivityCell]:
    """Solve independent scenarios, optionally in worker processes.  Output
    order follows input order."""
    jobs = [(label, sc, activity_threshold) for label, sc in cells]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(_solve_cell, jobs))
    return [_solve_cell(job) for job in jobs]


# Table of alpha/epsilon perturbations for the near-equal pair.  Columns are
# the sign patterns of (alpha1 - alpha2, eps1 - eps2); rows are +10%, +20%,
# -10%, -20%.  The printed table has alpha2 = 0.008 in the (<, <) +10% cell,
# which does not fit the row; 0.088 is used.
RATE_TABLE = {
    "a1>a2,e1>e2": [(0.088, 0.08, 0.594, 0.54), (0.096, 0.08, 0.648, 0.54),
                    (0.08, 0.072, 0.54, 0.486), (0.08, 0.064, 0.54, 0.432)],
    "a1<a2,e1<e2": [(0.08, 0.088, 0.54, 0.594), (0.08, 0.096, 0.54, 0.648),
                    (0.072, 0.08, 0.486, 0.54), (0.064, 0.08, 0.432, 0.54)],
    "a1>a2,e1<e2": [(0.088, 0.08, 0.54, 0.594), (0.096, 0.08, 0.54, 0.648),
                    (0.08, 0.072, 0.486, 0.54), (0.08, 0.064, 0.432, 0.54)],
    "a1<a2,e1>e2": [(0.08, 0.088, 0.594, 0.54), (0.08, 0.096, 0.648, 0.54),
                    (0.072, 0.08, 0.54, 0.486), (0.064, 0.08, 0.54, 0.432)],
}
RATE_ROWS = ("+10%", "+20%", "-10%", "-20%")


def rate_table_cells() -> list[tuple[str, dict]]:
    out = []
    for column, rows in RATE_TABLE.items():
        for row, (a1, a2, e1, e2) in zip(RATE_ROWS, rows):
            out.append((f"{column} {row}", dict(alpha1=a1, alpha2=a2, eps1=e1, eps2=e2)))
    return out


def rate_sensitivity_grid(base: Scenario, parallelism: int = 1,
                          activity_threshold: float = ACTIVITY_THRESHOLD) -> list[SensitivityCell]:
    """Baseline plus the 16 alpha/epsilon cells; the baseline comes first."""
    cells = [("baseline", base)]
    cells += [(label, base.with_params(label=label, **changes)) for label, changes in rate_table_cells()]
    return solve_cells(cells, parallelism, activity_threshold)


def reduction_probe(base: Scenario, reductions: Sequence[float] = (0.19, 0.20),
                    parallelism: int = 1,
                    activity_threshold: float = ACTIVITY_THRESHOLD) -> list[SensitivityCell]:
    """Scale alpha2 and eps1 down by each fraction; used to locate the
    reduction at which the control shape leaves the baseline class."""
    p = base.params
    cells = []
    for r in reductions:
        label = f"alpha2,eps1 -{100 * r:g}%"
        cells.append((label, base.with_params(label=label, alpha2=p.alpha2 * (1 - r),
                                              eps1=p.eps1 * (1 - r))))
    return solve_cells(cells, parallelism, activity_threshold)


@dataclass(frozen=True, eq=False)
class EfficacySweep:
    varied: str
    cells: list
    skipped: list
    reference: str | None
    last_unchanged: float | None  # last swept value still in the reference class
    first_changed: float | None


def _with_efficacy(base: Scenario, name: str, value: float) -> Scenario:
    p = base.params
    bname = "b1" if name == "theta1" else "b2"
    changes = {name: value}
    # a default-rule cost weight follows the efficacy; an explicit override is kept
    if abs(getattr(p, bname) - getattr(p, name) * COST_SCALE) <= 1e-9 * COST_SCALE:
        changes[bname] = value * COST_SCALE
    return base.with_params(label=f"{name}={value:g}", **changes)


def efficacy_sensitivity_sweep(base: Scenario, fixed: str, sweep_values: Sequence[float],
                               parallelism: int = 1,
                               activity_threshold: float = ACTIVITY_THRESHOLD) -> EfficacySweep:
    """Hold ``fixed`` ("theta1" or "theta2") and sweep the other efficacy.

    Values are visited in the given order; the first cell's class is the
    reference and the change point is the first value that leaves it.
    Values violating ``theta2 < theta1`` are skipped with a warning.
    """
    if fixed not in ("theta1", "theta2"):
        raise ValueError(f"fixed must be 'theta1' or 'theta2', got {fixed!r}")
    varied = "theta2" if fixed == "theta1" else "theta1"
    fixed_value = getattr(base.params, fixed)
    cells, skipped = [], []
    for v in sweep_values:
        th1, th2 = (fixed_value, v) if varied == "theta2" else (v, fixed_value)
        if not (0 < v < 1 and th2 < th1):
            warnings.warn(f"skipping {varied}={v}: requires 0 < theta2 < theta1 < 1", stacklevel=2)
            skipped.append(v)
            continue
        cells.append((f"{varied}={v:g}", _with_efficacy(base, varied, v)))
    solved = solve_cells(cells, parallelism, activity_threshold)

    reference = solved[0].classification if solved else None
    last_same = first_changed = None
    for cell in solved:
        value = getattr(cell.params, varied)
        if cell.classification == reference:
            last_same = value
        else:
            first_changed = value
            break
    return EfficacySweep(varied, solved, skipped, reference, last_same, first_changed)


def vaccination_effort(result: SweepResult) -> float:
    """Total doses administered, the trapezoid of ``(u1 + u2) * S``."""
    u = result.controls.values
    return trapezoid((u[:, 0] + u[:, 1]) * result.states.column(S), result.states.grid.step)


@dataclass(frozen=True, eq=False)
class InfectedCurve:
    label: str
    result: SweepResult

    @property
    def times(self) -> np.ndarray:
        return self.result.states.times

    @property
    def infected(self) -> np.ndarray:
        return self.result.states.column(I)

    @property
    def cumulative(self) -> float:
        return trapezoid(self.infected, self.result.states.grid.step)


POLICIES = {"only-V1": (1,), "both": (), "only-V2": (0,)}


def infected_comparison(base: Scenario, include_no_vaccine: bool = False) -> dict[str, InfectedCurve]:
    """Optimised single-vaccine and two-vaccine policies on the same scenario.

    A single-vaccine policy pins the other control to zero inside the sweep.
    ``include_no_vaccine`` adds a run with both controls pinned, which must
    coincide with the uncontrolled epidemic.
    """
    policies = dict(POLICIES)
    if include_no_vaccine:
        policies["none"] = (0, 1)
    return {label: InfectedCurve(label, base.solve(forced)) for label, forced in policies.items()}


def uncontrolled(base: Scenario) -> SweepResult:
    return uncontrolled_run(base.x0, base.params, base.grid)


def map_scenarios(fn: Callable[[Scenario], object], scenarios: Sequence[Scenario],
                  parallelism: int = 1) -> list:
    if parallelism > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(fn, scenarios))
    return [fn(sc) for sc in scenarios]
