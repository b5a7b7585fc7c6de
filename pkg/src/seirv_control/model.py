"""Two-vaccine SEIRV dynamics, Hamiltonian and adjoint system.

State vectors are ordered ``(S, V1, V2, E, I, R)``, adjoint vectors
``(lS, lV1, lV2, lE, lI, lR)`` and control vectors ``(u1, u2)``.  Any
length-6 (or length-2) sequence is accepted; the NamedTuple point types
below exist for readability at call sites.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple, Sequence

import numpy as np

S, V1, V2, E, I, R = range(6)
STATE_NAMES = ("S", "V1", "V2", "E", "I", "R")
ADJOINT_NAMES = ("lS", "lV1", "lV2", "lE", "lI", "lR")
CONTROL_NAMES = ("u1", "u2")

COST_SCALE = 1e4  # default cost weight is efficacy * COST_SCALE


class ModelError(ValueError):
    """Invalid parameter or input values."""


class SingularityError(ArithmeticError):
    """Total population is not positive."""


class StatePoint(NamedTuple):
    s: float
    v1: float
    v2: float
    e: float
    i: float
    r: float


class AdjointPoint(NamedTuple):
    l_s: float
    l_v1: float
    l_v2: float
    l_e: float
    l_i: float
    l_r: float


class ControlPoint(NamedTuple):
    u1: float
    u2: float


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological rates (1/day), efficacies and cost weights.

    ``b1``/``b2`` default to ``theta_i * 1e4`` when left as ``None``.
    """

    theta1: float
    theta2: float
    beta: float = 0.45
    sigma: float = 0.25
    gamma: float = 0.07
    delta: float = 0.65
    alpha1: float = 0.08
    alpha2: float = 0.08
    eps1: float = 0.54
    eps2: float = 0.54
    b1: float | None = None
    b2: float | None = None
    horizon_days: float = 60.0
    # Relaxes theta2 < theta1 for symmetric / swapped diagnostic runs.
    allow_any_order: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        if self.b1 is None:
            object.__setattr__(self, "b1", self.theta1 * COST_SCALE)
        if self.b2 is None:
            object.__setattr__(self, "b2", self.theta2 * COST_SCALE)
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                continue
            if not math.isfinite(v):
                raise ModelError(f"{f.name} must be finite, got {v!r}")
        for name in ("beta", "sigma", "gamma", "delta", "alpha1", "alpha2", "eps1", "eps2"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("theta1", "theta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ModelError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if not self.allow_any_order and not self.theta2 < self.theta1:
            raise ModelError(
                f"theta2 < theta1 required, got theta1={self.theta1}, theta2={self.theta2}"
            )
        if self.b1 <= 0 or self.b2 <= 0:
            raise ModelError(f"cost weights must be > 0, got b1={self.b1}, b2={self.b2}")
        if self.horizon_days <= 0:
            raise ModelError(f"horizon_days must be > 0, got {self.horizon_days}")

    @property
    def b_total(self) -> float:
        return self.b1 + self.b2

    @property
    def beta1(self) -> float:
        return derived_transmission_rate(self.beta, self.theta1)

    @property
    def beta2(self) -> float:
        return derived_transmission_rate(self.beta, self.theta2)

    def with_(self, **changes) -> "ModelParams":
        """Copy with changes.  Cost weights tied to the old efficacies are kept
        unless passed explicitly, so pass ``b1=None`` to re-derive them."""
        return replace(self, **changes)

    def swapped(self) -> "ModelParams":
        """Parameters with the roles of the two vaccines exchanged."""
        return replace(
            self,
            theta1=self.theta2, theta2=self.theta1,
            b1=self.b2, b2=self.b1,
            alpha1=self.alpha2, alpha2=self.alpha1,
            eps1=self.eps2, eps2=self.eps1,
            allow_any_order=True,
        )


def default_initial_state() -> StatePoint:
    """Brazil, 8 May 2020: susceptible, vaccinated, exposed, infected, recovered."""
    return StatePoint(2e8, 0.0, 0.0, 65124.0, 76603.0, 65124.0)


def derived_transmission_rate(beta: float, theta: float) -> float:
    """Transmission rate for a vaccinated individual, ``beta * (1 - theta)``."""
    if beta < 0:
        raise ModelError(f"beta must be >= 0, got {beta}")
    if not 0.0 <= theta <= 1.0:
        raise ModelError(f"efficacy must lie in [0, 1], got {theta}")
    return beta * (1.0 - theta)


def _population(s, v1, v2, e, i, r) -> float:
    n = s + v1 + v2 + e + i + r
    if not n > 0:
        raise SingularityError(f"total population must be > 0, got {n}")
    return n


def rate_coefficients(p: ModelParams) -> tuple:
    """Flat tuple consumed by the scalar kernels below."""
    return (p.beta, p.beta1, p.beta2, p.sigma, p.gamma, p.delta,
            p.alpha1, p.alpha2, p.eps1, p.eps2)


def state_kernel(s, v1, v2, e, i, r, u1, u2, c):
    """Scalar state derivative; ``c`` comes from :func:`rate_coefficients`."""
    b, b1, b2, sig, gam, dl, a1, a2, e1, e2 = c
    n = s + v1 + v2 + e + i + r
    if not n > 0:
        raise SingularityError(f"total population must be > 0, got {n}")
    inf_s = b * s * i / n
    inf_1 = b1 * v1 * i / n
    inf_2 = b2 * v2 * i / n
    return (
        -inf_s - u1 * s - u2 * s + e1 * v1 + e2 * v2 + dl * r,
        u1 * s - inf_1 - e1 * v1 - a1 * v1,
        u2 * s - inf_2 - e2 * v2 - a2 * v2,
        inf_s + inf_1 + inf_2 - sig * e,
        sig * e - gam * i,
        gam * i - dl * r + a1 * v1 + a2 * v2,
    )


def adjoint_kernel(ls, l1, l2, le, li, lr, s, v1, v2, e, i, r, u1, u2, c):
    """Scalar costate derivative (minus the state gradient of H)."""
    b, b1, b2, sig, gam, dl, a1, a2, e1, e2 = c
    n = s + v1 + v2 + e + i + r
    if not n > 0:
        raise SingularityError(f"total population must be > 0, got {n}")
    k = i / (n * n)
    # force-of-infection terms shared by several rows
    gs = b * s * (le - ls)
    g1 = b1 * v1 * (le - l1)
    g2 = b2 * v2 * (le - l2)
    gsum = gs + g1 + g2
    return (
        k * (g1 + g2 + b * (n - s) * (ls - le)) + u1 * (ls - l1) + u2 * (ls - l2),
        k * (gs + g2 + b1 * (n - v1) * (l1 - le)) + e1 * (l1 - ls) + a1 * (l1 - lr),
        k * (gs + g1 + b2 * (n - v2) * (l2 - le)) + e2 * (l2 - ls) + a2 * (l2 - lr),
        k * gsum + sig * (le - li),
        -(n - i) / (n * n) * gsum + gam * (li - lr) - 1.0,
        k * gsum + dl * (lr - ls),
    )


def state_rhs(t: float, x: Sequence[float], u: Sequence[float], p: ModelParams) -> np.ndarray:
    """Time derivative of the state.  ``t`` is unused (autonomous system)."""
    return np.array(state_kernel(*map(float, x), float(u[0]), float(u[1]), rate_coefficients(p)))


def adjoint_rhs(
    t: float,
    lam: Sequence[float],
    x: Sequence[float],
    u: Sequence[float],
    p: ModelParams,
) -> np.ndarray:
    """Time derivative of the costate, i.e. minus the state gradient of H."""
    return np.array(adjoint_kernel(
        *map(float, lam), *map(float, x), float(u[0]), float(u[1]), rate_coefficients(p)
    ))


def hamiltonian(
    x: Sequence[float], lam: Sequence[float], u: Sequence[float], p: ModelParams
) -> float:
    s, v1, v2, e, i, r = (float(c) for c in x)
    ls, l1, l2, le, li, lr = (float(c) for c in lam)
    u1, u2 = float(u[0]), float(u[1])
    n = _population(s, v1, v2, e, i, r)
    return (
        i + p.b1 * u1 * u1 + p.b2 * u2 * u2
        + u1 * s * (l1 - ls) + u2 * s * (l2 - ls)
        + p.beta * s * i / n * (le - ls)
        + p.beta1 * v1 * i / n * (le - l1)
        + p.beta2 * v2 * i / n * (le - l2)
        + p.eps1 * v1 * (ls - l1) + p.eps2 * v2 * (ls - l2)
        + p.alpha1 * v1 * (lr - l1) + p.alpha2 * v2 * (lr - l2)
        + p.sigma * e * (li - le) + p.delta * r * (ls - lr) + p.gamma * i * (lr - li)
    )


def control_gradient(
    x: Sequence[float], lam: Sequence[float], u: Sequence[float], p: ModelParams
) -> np.ndarray:
    """Analytic ``dH/du`` as ``(dH/du1, dH/du2)``."""
    s = float(x[S])
    ls = float(lam[S])
    return np.array([
        2.0 * p.b1 * float(u[0]) + s * (float(lam[V1]) - ls),
        2.0 * p.b2 * float(u[1]) + s * (float(lam[V2]) - ls),
    ])


def objective_integrand(x: Sequence[float], u: Sequence[float], p: ModelParams) -> float:
    """Running cost ``I + B1 u1^2 + B2 u2^2``."""
    u1, u2 = float(u[0]), float(u[1])
    return float(x[I]) + p.b1 * u1 * u1 + p.b2 * u2 * u2


def check_nonnegative(x: Sequence[float], rel_tol: float = 1e-6) -> None:
    """Raise ``ModelError`` if any component is below ``-rel_tol * N``."""
    arr = np.asarray(x, dtype=float)
    n = float(arr.sum())
    bad = np.flatnonzero(arr < -rel_tol * abs(n))
    if bad.size:
        k = int(bad[0])
        raise ModelError(f"{STATE_NAMES[k]} = {arr[k]:.6g} is negative beyond tolerance (N = {n:.6g})")
