"""YAML run configuration.

Example::

    theta1: 0.91
    theta2: 0.74
    horizon_days: 120
    b1: 7400            # optional, defaults to theta1 * 1e4
    initial: {S: 2.0e8, E: 65124}
    grid: {dt: 0.1}
    sweep: {convergence_tol: 1.0e-5, relaxation: 0.5, max_iterations: 500}
    analysis:
      activity_threshold: 0.05
      parallelism: 1
      efficacy: {fixed: theta2, values: [0.75, 0.76, 0.77, 0.78, 0.80]}

Only ``theta1`` and ``theta2`` are required.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .analysis import ACTIVITY_THRESHOLD, Scenario
from .integrate import TimeGrid
from .model import STATE_NAMES, ModelError, ModelParams, StatePoint, default_initial_state
from .sweep import SweepConfig


class ConfigError(ValueError):
    pass


PARAM_KEYS = ("beta", "sigma", "gamma", "delta", "alpha1", "alpha2", "eps1", "eps2",
              "theta1", "theta2", "b1", "b2", "horizon_days")
REQUIRED = ("theta1", "theta2")
SECTIONS = {
    "initial": set(STATE_NAMES),
    "grid": {"dt"},
    "sweep": {"max_iterations", "convergence_tol", "relaxation"},
    "analysis": {"activity_threshold", "parallelism", "efficacy"},
}
EFFICACY_KEYS = {"fixed", "values"}
TOP_LEVEL = set(PARAM_KEYS) | set(SECTIONS) | {"label"}

DEFAULT_EFFICACY = {"fixed": "theta2", "values": [0.75, 0.76, 0.77, 0.78, 0.80]}


@dataclass(frozen=True)
class AnalysisSettings:
    activity_threshold: float = ACTIVITY_THRESHOLD
    parallelism: int = 1
    efficacy_fixed: str = DEFAULT_EFFICACY["fixed"]
    efficacy_values: tuple = tuple(DEFAULT_EFFICACY["values"])


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    digest: str = ""

    def to_dict(self) -> dict:
        """Fully resolved settings in the same schema ``parse_config`` reads."""
        sc, p = self.scenario, self.scenario.params
        out: dict[str, Any] = {"label": sc.label}
        out.update({k: float(getattr(p, k)) for k in PARAM_KEYS})
        out["initial"] = {name: float(v) for name, v in zip(STATE_NAMES, sc.x0)}
        out["grid"] = {"dt": float(sc.grid.dt)}
        out["sweep"] = {
            "max_iterations": int(sc.sweep_cfg.max_iterations),
            "convergence_tol": float(sc.sweep_cfg.convergence_tol),
            "relaxation": float(sc.sweep_cfg.relaxation),
        }
        a = self.analysis
        out["analysis"] = {
            "activity_threshold": float(a.activity_threshold),
            "parallelism": int(a.parallelism),
            "efficacy": {"fixed": a.efficacy_fixed, "values": [float(v) for v in a.efficacy_values]},
        }
        return out


def _check_keys(mapping: Any, allowed: set, where: str) -> dict:
    if mapping is None:
        return {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(map(str, mapping)) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)} "
                          f"(allowed: {', '.join(sorted(allowed))})")
    return mapping


def _number(value: Any, key: str, kind=float):
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms such as 1e-5 as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_config(data: Any, digest: str = "") -> RunConfig:
    data = _check_keys(data, TOP_LEVEL, "config")
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    params_kw = {k: _number(data[k], k) for k in PARAM_KEYS if k in data and data[k] is not None}
    try:
        params = ModelParams(**params_kw)
    except ModelError as exc:
        raise ConfigError(f"invalid parameters: {exc}") from exc

    initial = _check_keys(data.get("initial"), SECTIONS["initial"], "initial")
    x0 = dict(zip(STATE_NAMES, default_initial_state()))
    for name, value in initial.items():
        x0[name] = _number(value, f"initial.{name}")
        if x0[name] < 0:
            raise ConfigError(f"initial.{name} must be >= 0, got {x0[name]}")
    if sum(x0.values()) <= 0:
        raise ConfigError("initial population must be positive")

    grid_cfg = _check_keys(data.get("grid"), SECTIONS["grid"], "grid")
    dt = _number(grid_cfg.get("dt", 0.1), "grid.dt")
    try:
        grid = TimeGrid.for_horizon(params.horizon_days, dt)
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc

    sweep_cfg = _check_keys(data.get("sweep"), SECTIONS["sweep"], "sweep")
    defaults = SweepConfig()
    try:
        sweep = SweepConfig(
            max_iterations=_number(sweep_cfg.get("max_iterations", defaults.max_iterations),
                                   "sweep.max_iterations", int),
            convergence_tol=_number(sweep_cfg.get("convergence_tol", defaults.convergence_tol),
                                    "sweep.convergence_tol"),
            relaxation=_number(sweep_cfg.get("relaxation", defaults.relaxation), "sweep.relaxation"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid sweep settings: {exc}") from exc

    analysis_cfg = _check_keys(data.get("analysis"), SECTIONS["analysis"], "analysis")
    eff = _check_keys(analysis_cfg.get("efficacy"), EFFICACY_KEYS, "analysis.efficacy")
    fixed = eff.get("fixed", DEFAULT_EFFICACY["fixed"])
    if fixed not in ("theta1", "theta2"):
        raise ConfigError(f"analysis.efficacy.fixed must be theta1 or theta2, got {fixed!r}")
    values = eff.get("values", DEFAULT_EFFICACY["values"])
    if not isinstance(values, list) or not values:
        raise ConfigError("analysis.efficacy.values must be a non-empty list")
    values = tuple(_number(v, "analysis.efficacy.values[]") for v in values)
    threshold = _number(analysis_cfg.get("activity_threshold", ACTIVITY_THRESHOLD),
                        "analysis.activity_threshold")
    if not 0 <= threshold < 1:
        raise ConfigError(f"analysis.activity_threshold must lie in [0, 1), got {threshold}")
    parallelism = _number(analysis_cfg.get("parallelism", 1), "analysis.parallelism", int)
    if parallelism < 1:
        raise ConfigError(f"analysis.parallelism must be >= 1, got {parallelism}")

    label = data.get("label") or ""
    if not isinstance(label, str):
        raise ConfigError(f"label must be a string, got {label!r}")
    scenario = Scenario(params, StatePoint(*x0.values()), grid, sweep, label)
    return RunConfig(scenario, AnalysisSettings(threshold, parallelism, fixed, values), digest)


def load_run_config(path: str | Path) -> RunConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data, hashlib.sha256(raw).hexdigest())


def load_config(path: str | Path) -> Scenario:
    return load_run_config(path).scenario
