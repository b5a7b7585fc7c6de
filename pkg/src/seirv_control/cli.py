"""Command-line entry point: ``seirv-control <command> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .config import ConfigError, RunConfig, load_run_config
from .integrate import IntegrationError, TimeGrid, trapezoid
from .model import ADJOINT_NAMES, CONTROL_NAMES, STATE_NAMES, I, ModelError, SingularityError
from .sweep import SweepConfig, SweepResult, uncontrolled_run

log = logging.getLogger("seirv_control")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("solve", "sweep-rates", "sweep-efficacy", "compare-infected", "baseline")

STATE_COLUMNS = ("t", *STATE_NAMES, "N")
CONTROL_COLUMNS = ("t", *CONTROL_NAMES)
ADJOINT_COLUMNS = ("t", *ADJOINT_NAMES)
CELL_COLUMNS = ("label", "theta1", "theta2", "alpha1", "alpha2", "eps1", "eps2", "b1", "b2",
                "classification", "crossover_day", "share_v1", "share_v2", "objective",
                "iterations", "converged")


def fmt(x) -> str:
    """17 significant digits, enough for an exact float round-trip."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


class OutputDir:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.written: list[str] = []

    def write(self, name: str, text: str) -> None:
        atomic_write(self.root / name, text)
        self.written.append(name)


def write_trajectories(out: OutputDir, result: SweepResult) -> None:
    t = result.states.times
    x = result.states.values
    out.write("states.csv", csv_text(STATE_COLUMNS, (
        (t[k], *x[k], x[k].sum()) for k in range(len(t)))))
    out.write("controls.csv", csv_text(CONTROL_COLUMNS, (
        (t[k], *result.controls.values[k]) for k in range(len(t)))))
    out.write("adjoints.csv", csv_text(ADJOINT_COLUMNS, (
        (t[k], *result.adjoints.values[k]) for k in range(len(t)))))


def result_summary(result: SweepResult, threshold: float) -> dict:
    shape = analysis.classify_control(result.controls, threshold)
    try:
        split = analysis.procurement_split(result)
        split_doc = {"share_v1": split.share_v1, "share_v2": split.share_v2,
                     "area_v1": split.area_v1, "area_v2": split.area_v2}
    except analysis.UndefinedSplitError:
        split_doc = None
    return {
        "objective": result.objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "procurement": split_doc,
        "classification": shape.tag,
        "crossover_day": shape.crossover_day,
        "activity_threshold": threshold,
        "cumulative_infected": trapezoid(result.states.column(I), result.grid.step),
    }


def cell_row(cell: analysis.SensitivityCell):
    p = cell.params
    split = cell.split
    return (cell.label, p.theta1, p.theta2, p.alpha1, p.alpha2, p.eps1, p.eps2, p.b1, p.b2,
            cell.classification, cell.shape.crossover_day,
            split.share_v1 if split else None, split.share_v2 if split else None,
            cell.result.objective, cell.result.iterations, cell.result.converged)


def cmd_solve(cfg: RunConfig, out: OutputDir) -> dict:
    result = cfg.scenario.solve()
    write_trajectories(out, result)
    summary = result_summary(result, cfg.analysis.activity_threshold)
    out.write("summary.json", json_text(summary))
    return summary


def cmd_baseline(cfg: RunConfig, out: OutputDir) -> dict:
    sc = cfg.scenario
    result = uncontrolled_run(sc.x0, sc.params, sc.grid)
    write_trajectories(out, result)
    summary = result_summary(result, cfg.analysis.activity_threshold)
    out.write("summary.json", json_text(summary))
    return summary


def cmd_sweep_rates(cfg: RunConfig, out: OutputDir) -> dict:
    a = cfg.analysis
    cells = analysis.rate_sensitivity_grid(cfg.scenario, a.parallelism, a.activity_threshold)
    probe = analysis.reduction_probe(cfg.scenario, parallelism=a.parallelism,
                                     activity_threshold=a.activity_threshold)
    out.write("cells.csv", csv_text(CELL_COLUMNS, (cell_row(c) for c in cells)))
    baseline = cells[0].classification
    summary = {
        "baseline_classification": baseline,
        "changed_cells": [c.label for c in cells[1:] if c.classification != baseline],
        "non_converged_cells": [c.label for c in cells if not c.converged],
        "reduction_probe": [{"label": c.label, "classification": c.classification,
                             "share_v1": c.split.share_v1 if c.split else None} for c in probe],
        "activity_threshold": a.activity_threshold,
    }
    out.write("summary.json", json_text(summary))
    return summary


def cmd_sweep_efficacy(cfg: RunConfig, out: OutputDir) -> dict:
    a = cfg.analysis
    sweep = analysis.efficacy_sensitivity_sweep(cfg.scenario, a.efficacy_fixed, a.efficacy_values,
                                                a.parallelism, a.activity_threshold)
    out.write("cells.csv", csv_text(CELL_COLUMNS, (cell_row(c) for c in sweep.cells)))
    summary = {
        "fixed": a.efficacy_fixed,
        "varied": sweep.varied,
        "reference_classification": sweep.reference,
        "last_unchanged": sweep.last_unchanged,
        "first_changed": sweep.first_changed,
        "skipped": list(sweep.skipped),
        "non_converged_cells": [c.label for c in sweep.cells if not c.converged],
        "activity_threshold": a.activity_threshold,
    }
    out.write("summary.json", json_text(summary))
    return summary


def cmd_compare_infected(cfg: RunConfig, out: OutputDir) -> dict:
    curves = analysis.infected_comparison(cfg.scenario)
    labels = list(curves)
    t = curves[labels[0]].times
    out.write("infected.csv", csv_text(("t", *labels), (
        (t[k], *(curves[l].infected[k] for l in labels)) for k in range(len(t)))))
    summary = {
        "cumulative_infected": {l: c.cumulative for l, c in curves.items()},
        "objective": {l: c.result.objective for l, c in curves.items()},
        "converged": {l: c.result.converged for l, c in curves.items()},
    }
    out.write("summary.json", json_text(summary))
    return summary


HANDLERS = {
    "solve": cmd_solve,
    "baseline": cmd_baseline,
    "sweep-rates": cmd_sweep_rates,
    "sweep-efficacy": cmd_sweep_efficacy,
    "compare-infected": cmd_compare_infected,
}


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    sc = cfg.scenario
    try:
        grid = sc.grid if args.dt is None else TimeGrid.for_horizon(sc.params.horizon_days, args.dt)
        sweep = SweepConfig(
            max_iterations=sc.sweep_cfg.max_iterations if args.max_iters is None else args.max_iters,
            convergence_tol=sc.sweep_cfg.convergence_tol if args.tol is None else args.tol,
            relaxation=sc.sweep_cfg.relaxation if args.relaxation is None else args.relaxation,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    a = cfg.analysis
    if args.parallelism is not None:
        if args.parallelism < 1:
            raise ConfigError(f"--parallelism must be >= 1, got {args.parallelism}")
        a = replace(a, parallelism=args.parallelism)
    return replace(cfg, scenario=replace(sc, grid=grid, sweep_cfg=sweep), analysis=a)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seirv-control",
        description="Optimal two-vaccine campaigns for an SEIRV model (forward-backward sweep).",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="YAML scenario file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--dt", type=float, help="step size in days (default 0.1)")
    parser.add_argument("--tol", type=float, help="relative L1 convergence tolerance")
    parser.add_argument("--max-iters", type=int, help="sweep iteration cap")
    parser.add_argument("--relaxation", type=float, help="weight of the new control in (0, 1]")
    parser.add_argument("--parallelism", type=int, help="worker processes for grid commands")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_run_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = OutputDir(Path(args.out))
    started = datetime.now(timezone.utc).isoformat()
    try:
        summary = HANDLERS[args.command](cfg, out)
    except (IntegrationError, SingularityError, ModelError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    manifest = {
        "command": args.command,
        "scenario": cfg.scenario.label,
        "config": cfg.to_dict(),
        "config_digest": cfg.digest,
        "config_path": str(args.config),
        "outputs": out.written + ["manifest.json"],
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    out.write("manifest.json", json_text(manifest))
    if "converged" in summary and summary["converged"] is False:
        log.warning("sweep did not converge; results recorded with converged=false")
    return EXIT_OK


def manifest_config_yaml(manifest_path: str | Path) -> str:
    """Resolved settings of a previous run, as a config document."""
    manifest = json.loads(Path(manifest_path).read_text())
    return yaml.safe_dump(manifest["config"], sort_keys=False)


if __name__ == "__main__":
    sys.exit(main())
