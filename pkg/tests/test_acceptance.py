"""Acceptance criteria 1-12, each at its stated tolerance.

Every test records one pass/fail line in ``CRITERIA_REPORT`` before it
asserts; the lines are printed in the terminal summary.  Criteria 5-9 run
twice: at the default transmission rate and at the secondary rate 0.485.
"""
import math

import numpy as np
import pytest

from conftest import CRITERIA_REPORT, random_point
from seirv_control.analysis import (
    EFFICACY_PAIRS,
    HORIZONS,
    SIMULTANEOUS,
    V1_THEN_SIMULTANEOUS,
    classify_control,
    efficacy_sensitivity_sweep,
    infected_comparison,
    procurement_split,
    rate_sensitivity_grid,
    reference_scenario,
)
from seirv_control.integrate import rk4_step
from seirv_control.model import S, V1, V2, adjoint_rhs, hamiltonian
from seirv_control.sweep import uncontrolled_run

pytestmark = pytest.mark.acceptance

BETAS = [pytest.param(0.45, id="beta0.45"), pytest.param(0.485, id="beta0.485")]


def record(name, passed, detail):
    CRITERIA_REPORT.append((name, bool(passed), detail))
    assert passed, f"{name}: {detail}"


def beta_kw(beta):
    return {} if beta == 0.45 else {"beta": beta}


def test_criterion_01_conservation(solved):
    worst = 0.0
    for pair in EFFICACY_PAIRS:
        for horizon in HORIZONS:
            x = solved(*pair, horizon).states.values
            n = x.sum(axis=1)
            worst = max(worst, np.abs(n - n[0]).max() / n[0])
    record("1 conservation", worst < 1e-9, f"max |N(t)-N(0)|/N(0) = {worst:.2e} (< 1e-9)")


def test_criterion_02_adjoint_gradient():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        x, lam, u, p = random_point(rng)
        analytic = adjoint_rhs(0.0, lam, x, u, p)
        fd = np.empty(6)
        for j in range(6):
            h = 1e-4 * max(abs(x[j]), 1.0)

            def d(step):
                xp, xm = x.copy(), x.copy()
                xp[j] += step
                xm[j] -= step
                return (hamiltonian(xp, lam, u, p) - hamiltonian(xm, lam, u, p)) / (2 * step)

            fd[j] = -(4 * d(h / 2) - d(h)) / 3
        worst = max(worst, np.abs(fd - analytic).max() / np.abs(analytic).max())
    record("2 adjoint vs -dH/dx", worst < 1e-6, f"max relative error {worst:.2e} (< 1e-6)")


def test_criterion_03_stationarity(solved):
    worst = 0.0
    for pair in EFFICACY_PAIRS:
        for horizon in HORIZONS:
            r = solved(*pair, horizon)
            if not r.converged:
                continue
            p = reference_scenario(*pair, horizon).params
            s, lam = r.states.column(S), r.adjoints.values
            for j, (v, b) in enumerate(((V1, p.b1), (V2, p.b2))):
                u = r.controls.values[:, j]
                interior = (u > 0) & (u < 1)
                if interior.any():
                    grad = 2 * b * u - s * (lam[:, S] - lam[:, v])
                    worst = max(worst, np.abs(grad[interior]).max() / b)
    record("3 stationarity", worst < 1e-3, f"max |dH/du_i|/B_i = {worst:.2e} (< 1e-3)")


def test_criterion_04_dominance(solved):
    shares = {}
    for theta1 in (0.91, 0.74, 0.67):
        for horizon in HORIZONS:
            shares[(theta1, horizon)] = procurement_split(solved(theta1, 0.51, horizon)).share_v2
    worst = max(shares.values())
    detail = ", ".join(f"{t1}/T{h:g}: {s:.2f}%" for (t1, h), s in shares.items())
    record("4 dominance V2 share < 1%", worst < 1.0, detail)


def crossover_check(solved, theta2, days, table, beta):
    parts, ok = [], True
    for horizon, day, share in zip(HORIZONS, days, table):
        r = solved(0.91, theta2, horizon, **beta_kw(beta))
        shape = classify_control(r.controls)
        v1 = procurement_split(r).share_v1
        ok &= shape.tag == V1_THEN_SIMULTANEOUS
        ok &= shape.crossover_day is not None and abs(shape.crossover_day - day) <= 5
        ok &= abs(v1 - share) <= 3
        cross = "none" if shape.crossover_day is None else f"{shape.crossover_day:g}"
        parts.append(f"T{horizon:g}: {shape.tag}, day {cross} (want {day}+-5), "
                     f"V1 {v1:.2f}% (want {share:.2f}+-3)")
    return ok, "; ".join(parts)


@pytest.mark.parametrize("beta", BETAS)
def test_criterion_05_crossover_091_074(solved, beta):
    table = [100 * 93.44 / (93.44 + 6.66), 98.18, 98.55]
    ok, detail = crossover_check(solved, 0.74, (51, 109, 169), table, beta)
    record(f"5 crossover 0.91/0.74 beta={beta}", ok, detail)


@pytest.mark.parametrize("beta", BETAS)
def test_criterion_06_crossover_091_067(solved, beta):
    ok, detail = crossover_check(solved, 0.67, (57, 116, 176), (98.77, 99.70, 99.76), beta)
    record(f"6 crossover 0.91/0.67 beta={beta}", ok, detail)


@pytest.mark.parametrize("beta", BETAS)
def test_criterion_07_near_equal(solved, beta):
    parts, ok = [], True
    for horizon in HORIZONS:
        r = solved(0.74, 0.67, horizon, **beta_kw(beta))
        tag = classify_control(r.controls).tag
        v1 = procurement_split(r).share_v1
        ok &= tag == SIMULTANEOUS and abs(v1 - 50.0) <= 2
        parts.append(f"T{horizon:g}: {tag}, V1 {v1:.2f}%")
    record(f"7 near-equal 0.74/0.67 beta={beta}", ok, "; ".join(parts) + " (want 50+-2)")


@pytest.mark.parametrize("beta", BETAS)
def test_criterion_08_rate_sensitivity(beta):
    cells = rate_sensitivity_grid(reference_scenario(0.74, 0.67, **beta_kw(beta)))
    baseline = cells[0].classification
    kept = [c for c in cells[1:] if not c.label.endswith("-20%")]
    changed = [c.label for c in kept if c.classification != baseline]
    target = next(c for c in cells[1:]
                  if (c.params.alpha1, c.params.alpha2, c.params.eps1, c.params.eps2)
                  == (0.08, 0.064, 0.432, 0.54))
    v1 = target.split.share_v1
    ok = (not changed and target.classification != baseline
          and abs(v1 - 71.60) <= 4 and abs(target.split.share_v2 - 28.40) <= 4)
    detail = (f"baseline {baseline}; +-10%/+20% cells changed: {changed or 'none'}; "
              f"target cell {target.classification}, V1 {v1:.2f}% (want 71.60+-4)")
    record(f"8 rate sensitivity beta={beta}", ok, detail)


def threshold_check(sweep, centre):
    if sweep.first_changed is None:
        return False, f"no change in {sweep.reference} over the sweep (want near {centre})"
    ok = abs(sweep.last_unchanged - centre) <= 0.02
    return ok, (f"{sweep.reference} up to {sweep.last_unchanged:g}, changes at "
                f"{sweep.first_changed:g} (want {centre}+-0.02)")


@pytest.mark.parametrize("beta", BETAS)
def test_criterion_09_efficacy_sensitivity(beta):
    base = reference_scenario(0.74, 0.67, **beta_kw(beta))
    up = efficacy_sensitivity_sweep(base, "theta2", np.round(np.arange(0.74, 0.8201, 0.01), 2))
    down = efficacy_sensitivity_sweep(base, "theta1", np.round(np.arange(0.67, 0.5999, -0.01), 2))
    ok1, d1 = threshold_check(up, 0.77)
    ok2, d2 = threshold_check(down, 0.65)
    record(f"9 efficacy sensitivity beta={beta}", ok1 and ok2, f"theta1 sweep: {d1}; theta2 sweep: {d2}")


def test_criterion_10_infected_comparison():
    curves = infected_comparison(reference_scenario(0.74, 0.67))
    cum = {k: c.cumulative for k, c in curves.items()}
    ok = cum["only-V2"] > cum["both"] and cum["both"] <= cum["only-V1"] * 1.01
    detail = ", ".join(f"{k} {v:.4e}" for k, v in cum.items())
    record("10 infected ordering", ok, detail)


def test_criterion_11_self_consistency(solved):
    j = [solved(0.91, 0.51, 60.0, dt=dt).objective for dt in (0.1, 0.05)]
    rel = abs(j[0] - j[1]) / abs(j[1])
    errors = []
    for dt in (0.2, 0.1, 0.05):
        y = (1.0,)
        for _ in range(int(round(1.0 / dt))):
            y = rk4_step(lambda v: (v,), y, dt, (), (), ())
        errors.append(abs(y[0] - math.e))
    orders = [math.log2(errors[0] / errors[1]), math.log2(errors[1] / errors[2])]
    ok = rel < 1e-4 and all(abs(o - 4.0) <= 0.2 for o in orders)
    record("11 self-consistency", ok,
           f"J step-halving {rel:.2e} (< 1e-4); RK4 orders {orders[0]:.3f}, {orders[1]:.3f} (4+-0.2)")


def test_criterion_12_degenerate_cost(solved):
    r = solved(0.91, 0.51, b1=1e12, b2=1e12)
    sc = reference_scenario(0.91, 0.51, b1=1e12, b2=1e12)
    free = uncontrolled_run(sc.x0, sc.params, sc.grid).states.values
    sup = np.abs(r.controls.values).max()
    dev = np.abs(r.states.values - free).max() / free.sum(axis=1).max()
    ok = sup < 1e-3 and dev < 1e-6
    record("12 degenerate cost", ok,
           f"sup |u| = {sup:.2e} (< 1e-3); max |x - x_free|/N = {dev:.2e} (< 1e-6)")
