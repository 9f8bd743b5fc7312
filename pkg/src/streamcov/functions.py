"""Completely monotone functions, positive Bernstein functions, and unilateral kernels.

Completely monotone families (``CM_*``) serve as the temporal generator and
Bernstein families (``BF_*``) as the spatial scaling in Gneiting-type
models.  Kernels feed the tail-up / tail-down convolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import comb

from .errors import OutOfDomainParam

__all__ = [
    "CM_FAMILIES",
    "BF_FAMILIES",
    "ScalarFamily",
    "Composite",
    "Kernel",
    "eval_scalar",
    "eval_kernel",
    "bernstein_derivative",
    "MonotonicityReport",
    "check_complete_monotonicity",
]

# name -> (parameter names, constraint checks as (predicate, text))
_FAMILY_PARAMS: dict[str, tuple[tuple[str, ...], list[tuple[Callable[[dict], bool], str]]]] = {
    "CM_PowExp": (
        ("c", "nu"),
        [(lambda p: p["c"] > 0, "c > 0"), (lambda p: 0 < p["nu"] <= 1, "0 < nu <= 1")],
    ),
    "CM_NegPow": (
        ("c", "nu"),
        [(lambda p: p["c"] > 0, "c > 0"), (lambda p: p["nu"] < 0, "nu < 0")],
    ),
    "CM_Sech": (
        ("c", "nu"),
        [(lambda p: p["c"] > 0, "c > 0"), (lambda p: p["nu"] > 0, "nu > 0")],
    ),
    "CM_Cauchy": (
        ("c", "nu", "gamma"),
        [
            (lambda p: p["c"] > 0, "c > 0"),
            (lambda p: p["nu"] > 0, "nu > 0"),
            (lambda p: 0 < p["gamma"] <= 1, "0 < gamma <= 1"),
        ],
    ),
    "BF_PowerPlusOne": (
        ("kappa", "beta", "lam"),
        [
            (lambda p: p["kappa"] > 0, "kappa > 0"),
            (lambda p: 0 <= p["beta"] <= 1, "0 <= beta <= 1"),
            (lambda p: 0 < p["lam"] <= 1, "0 < lam <= 1"),
        ],
    ),
    "BF_LogRatio": (
        ("kappa", "beta", "lam"),
        [
            (lambda p: p["kappa"] > 0, "kappa > 0"),
            (lambda p: p["beta"] > 1, "beta > 1"),
            (lambda p: 0 < p["lam"] <= 1, "0 < lam <= 1"),
        ],
    ),
    "BF_PowerPlusBeta": (
        ("lam", "beta"),
        [(lambda p: 0 < p["lam"] <= 1, "0 < lam <= 1"), (lambda p: p["beta"] > 0, "beta > 0")],
    ),
    "BF_ExpSaturate": (
        ("kappa", "beta"),
        [(lambda p: p["kappa"] > 0, "kappa > 0"), (lambda p: p["beta"] > 1, "beta > 1")],
    ),
}

CM_FAMILIES = tuple(k for k in _FAMILY_PARAMS if k.startswith("CM_"))
BF_FAMILIES = tuple(k for k in _FAMILY_PARAMS if k.startswith("BF_"))


@dataclass(frozen=True)
class ScalarFamily:
    """One row of the catalogue of completely monotone / Bernstein functions."""

    family: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in _FAMILY_PARAMS:
            raise OutOfDomainParam(f"unknown scalar family {self.family!r}")
        names, checks = _FAMILY_PARAMS[self.family]
        extra = set(self.params) - set(names)
        missing = set(names) - set(self.params)
        if extra or missing:
            raise OutOfDomainParam(
                f"{self.family} takes parameters {names}; missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        p = {k: float(v) for k, v in self.params.items()}
        object.__setattr__(self, "params", p)
        for ok, text in checks:
            if not ok(p):
                raise OutOfDomainParam(f"{self.family}: requires {text}, got {p}")

    @property
    def is_completely_monotone(self) -> bool:
        return self.family.startswith("CM_")

    @property
    def is_bernstein(self) -> bool:
        return self.family.startswith("BF_")

    def __call__(self, t):
        return eval_scalar(self, t)


@dataclass(frozen=True)
class Composite:
    """Sum or product of completely monotone functions (again completely monotone)."""

    op: str
    parts: tuple

    def __call__(self, t):
        vals = [f(t) for f in self.parts]
        if self.op == "sum":
            return sum(vals)
        if self.op == "product":
            out = vals[0]
            for v in vals[1:]:
                out = out * v
            return out
        raise ValueError(f"unknown composite op {self.op!r}")

    @property
    def is_completely_monotone(self) -> bool:
        return all(getattr(f, "is_completely_monotone", False) for f in self.parts)


def eval_scalar(f: ScalarFamily, t):
    """Evaluate a catalogue function at ``t >= 0`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise OutOfDomainParam("scalar functions are defined for t >= 0")
    p = f.params
    name = f.family
    with np.errstate(divide="ignore", over="ignore"):
        if name == "CM_PowExp":
            out = np.exp(-p["c"] * t ** p["nu"])
        elif name == "CM_NegPow":
            out = np.exp(p["c"] * t ** p["nu"])  # +inf at t = 0
        elif name == "CM_Sech":
            s = p["c"] * np.sqrt(t)
            # (2 / (e^s + e^-s))^nu written to avoid overflow
            out = np.exp(p["nu"] * (math.log(2.0) - s - np.log1p(np.exp(-2.0 * s))))
        elif name == "CM_Cauchy":
            out = (1.0 + p["c"] * t ** p["gamma"]) ** (-p["nu"])
        elif name == "BF_PowerPlusOne":
            out = (p["kappa"] * t ** p["lam"] + 1.0) ** p["beta"]
        elif name == "BF_LogRatio":
            out = np.log(p["kappa"] * t ** p["lam"] + p["beta"]) / math.log(p["beta"])
        elif name == "BF_PowerPlusBeta":
            out = t ** p["lam"] + p["beta"]
        elif name == "BF_ExpSaturate":
            out = p["beta"] - np.exp(-p["kappa"] * t)
        else:  # pragma: no cover - guarded in __post_init__
            raise OutOfDomainParam(name)
    return out[()] if out.ndim == 0 else out


def bernstein_derivative(f: ScalarFamily) -> Callable:
    """Closed-form first derivative of a Bernstein family (completely monotone on (0, inf))."""
    if not f.is_bernstein:
        raise OutOfDomainParam(f"{f.family} is not a Bernstein family")
    p = f.params
    name = f.family

    def deriv(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            if name == "BF_PowerPlusOne":
                k, b, lam = p["kappa"], p["beta"], p["lam"]
                return b * (k * t**lam + 1.0) ** (b - 1.0) * k * lam * t ** (lam - 1.0)
            if name == "BF_LogRatio":
                k, b, lam = p["kappa"], p["beta"], p["lam"]
                return k * lam * t ** (lam - 1.0) / ((k * t**lam + b) * math.log(b))
            if name == "BF_PowerPlusBeta":
                return p["lam"] * t ** (p["lam"] - 1.0)
            return p["kappa"] * np.exp(-p["kappa"] * t)

    return deriv


@dataclass(frozen=True)
class Kernel:
    """Unilateral moving-average kernel: ``exponential`` or ``mariah``."""

    family: str
    theta1: float
    theta2: float | None = None

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam == "exponential":
            if self.theta2 is None or not (self.theta1 > 0 and self.theta2 > 0):
                raise OutOfDomainParam("exponential kernel needs theta1 > 0 and theta2 > 0")
        elif fam == "mariah":
            if not self.theta1 > 0:
                raise OutOfDomainParam("mariah kernel needs theta1 > 0")
        else:
            raise OutOfDomainParam(f"unknown kernel family {self.family!r}")

    def __call__(self, x):
        return eval_kernel(self, x)


def eval_kernel(k: Kernel, x):
    """Kernel value; zero for ``x < 0``."""
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    if k.family == "exponential":
        val = k.theta1 * np.exp(-xp / k.theta2)
    else:
        val = 0.5 / (1.0 + xp / k.theta1)
    out = np.where(x < 0, 0.0, val)
    return out[()] if out.ndim == 0 else out


@dataclass
class MonotonicityReport:
    grid: np.ndarray
    order: int
    # signed[j, i] = (-1)^j f^(j)(grid[i]) by central differences
    signed: np.ndarray
    tolerance: float
    # roundoff floor of each difference; smaller magnitudes are unresolved
    noise: np.ndarray | None = None

    @property
    def _violations(self) -> np.ndarray:
        floor = 0.0 if self.noise is None else self.noise
        return self.signed < self.tolerance - floor

    @property
    def passed(self) -> np.ndarray:
        return ~np.any(self._violations, axis=0)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def failures(self) -> list[tuple[int, float]]:
        """(derivative order, grid point) pairs violating the sign condition."""
        j, i = np.nonzero(self._violations)
        return [(int(a), float(self.grid[b])) for a, b in zip(j, i)]


_EPS = np.finfo(float).eps


def _central_difference(f, t: float, order: int) -> tuple[float, float]:
    """(difference quotient, roundoff bound) for the ``order``-th derivative at ``t``."""
    if order == 0:
        return float(f(t)), 0.0
    h = _EPS ** (1.0 / (order + 2)) * max(t, 1.0)
    h = min(h, t / (order + 1))  # keep the stencil inside (0, inf)
    ks = np.arange(order + 1)
    nodes = t + (order / 2.0 - ks) * h
    vals = np.asarray(f(nodes), dtype=float)
    weights = (-1.0) ** ks * comb(order, ks)
    noise = 4.0 * _EPS * float(np.sum(np.abs(weights) * np.abs(vals))) / h**order
    return float(np.dot(weights, vals) / h**order), noise


def check_complete_monotonicity(
    f: Callable, grid: Sequence[float], order: int = 3, tolerance: float = -1e-6
) -> MonotonicityReport:
    """Test ``(-1)^j f^(j)(t) >= tolerance`` for ``j = 0..order`` on ``grid``.

    A value counts as a violation only when it falls below ``tolerance`` by
    more than the roundoff bound of its difference quotient.
    """
    if order > 4:
        raise ValueError("order must be <= 4")
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("grid must lie in (0, inf)")
    signed = np.empty((order + 1, len(grid)))
    noise = np.empty_like(signed)
    for j in range(order + 1):
        for i, t in enumerate(grid):
            v, e = _central_difference(f, t, j)
            signed[j, i] = (-1) ** j * v
            noise[j, i] = e
    return MonotonicityReport(grid, order, signed, tolerance, noise)
