"""Weight functions multiplying the Laplacian, and their admissibility checks.

The shipped families are

    power_inverse(M):  w(y) = 1 / (1 + y**M)
    power_shifted(M):  w(y) = 1 / (1 + y)**M
    exponential:       w(y) = exp(-y)

All of them are defined on the hyperbolic regime y > -1/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

#: Strict guard band below which y is considered outside the domain.
DOMAIN_EDGE = -0.5
DOMAIN_GUARD = 1e-12

FAMILIES = ("power_inverse", "power_shifted", "exponential")
MAX_POWER = 8

ASSUMPTIONS = (
    "positivity",
    "normalization",
    "monotone_decay",
    "derivative_bounds",
    "weight_vs_derivative",
)


class WeightDomainError(ValueError):
    """Raised when a weight is evaluated at y <= -1/2."""


class WeightAssumptionError(ValueError):
    """Raised by :meth:`AdmissibilityReport.raise_for_failure`."""


def _check_domain(y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= DOMAIN_EDGE + DOMAIN_GUARD):
        bad = float(np.min(y))
        raise WeightDomainError(f"weight evaluated at y = {bad!r} <= -1/2")
    return y


def _scalar_or_array(out, like):
    if np.ndim(like) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class WeightFunction:
    """A member of one of the shipped weight families.

    ``alpha_hint`` is the candidate constant in the comparison
    ``w(y) <= alpha * |w'(y)|**0.5`` on ``y >= 1``.
    """

    family: str
    power: int | None = None
    alpha_hint: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown weight family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "exponential":
            if self.power is not None:
                raise ValueError("the exponential family takes no power")
        else:
            if self.power is None or int(self.power) != self.power or not 1 <= self.power <= MAX_POWER:
                raise ValueError(f"{self.family} needs an integer power in [1, {MAX_POWER}]")
        if not self.alpha_hint > 0:
            raise ValueError("alpha_hint must be positive")

    @property
    def name(self) -> str:
        if self.power is None:
            return self.family
        return f"{self.family}({self.power})"

    # Unchecked kernels; callers on hot paths guard the domain themselves.
    def _value(self, y):
        if self.family == "power_inverse":
            return 1.0 / (1.0 + y**self.power)
        if self.family == "power_shifted":
            return (1.0 + y) ** (-self.power)
        return np.exp(-y)

    def _derivative(self, y):
        m = self.power
        if self.family == "power_inverse":
            return -m * y ** (m - 1) / (1.0 + y**m) ** 2
        if self.family == "power_shifted":
            return -m * (1.0 + y) ** (-m - 1)
        return -np.exp(-y)

    def __call__(self, y):
        return self.value(y)

    def value(self, y):
        y_arr = _check_domain(y)
        return _scalar_or_array(self._value(y_arr), y)

    def derivative(self, y):
        y_arr = _check_domain(y)
        return _scalar_or_array(self._derivative(y_arr), y)

    def log_value(self, y):
        """log w(y), finite wherever w is positive (no underflow)."""
        y = _check_domain(y)
        m = self.power
        if self.family == "power_inverse":
            return -np.log1p(y**m)
        if self.family == "power_shifted":
            return -m * np.log1p(y)
        return -y

    def log_abs_derivative(self, y):
        """log |w'(y)| for y > 0."""
        y = np.asarray(y, dtype=float)
        m = self.power
        if self.family == "power_inverse":
            return np.log(m) + (m - 1) * np.log(y) - 2.0 * np.log1p(y**m)
        if self.family == "power_shifted":
            return np.log(m) - (m + 1) * np.log1p(y)
        return -y

    def sympy_expr(self, y: sp.Symbol) -> sp.Expr:
        m = self.power
        if self.family == "power_inverse":
            return 1 / (1 + y**m)
        if self.family == "power_shifted":
            return (1 + y) ** (-m)
        return sp.exp(-y)


@dataclass(frozen=True)
class CustomWeight:
    """A weight given by a sympy expression in ``y``.

    Only meant for exercising the admissibility checks from Python; the run
    configuration cannot reach it.
    """

    expr_fn: Callable[[sp.Symbol], sp.Expr]
    name: str = "custom"
    alpha_hint: float = 1.0
    _fns: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = sp.Symbol("y", real=True)
        expr = self.expr_fn(y)
        value = sp.lambdify(y, expr, "numpy")
        deriv = sp.lambdify(y, sp.diff(expr, y), "numpy")
        object.__setattr__(self, "_fns", (value, deriv))

    def _value(self, y):
        return np.asarray(self._fns[0](y), dtype=float) * np.ones_like(y, dtype=float)

    def _derivative(self, y):
        return np.asarray(self._fns[1](y), dtype=float) * np.ones_like(y, dtype=float)

    def __call__(self, y):
        return self.value(y)

    def value(self, y):
        y_arr = _check_domain(y)
        return _scalar_or_array(self._value(y_arr), y)

    def derivative(self, y):
        y_arr = _check_domain(y)
        return _scalar_or_array(self._derivative(y_arr), y)

    def log_value(self, y):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self._value(_check_domain(y)))

    def log_abs_derivative(self, y):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self._derivative(np.asarray(y, dtype=float))))

    def sympy_expr(self, y):
        return self.expr_fn(y)


def make_weight(family: str, power: int | None = None, alpha_hint: float = 1.0) -> WeightFunction:
    if family == "exponential":
        power = None
    return WeightFunction(family, power, alpha_hint)


def shipped_weights() -> list[WeightFunction]:
    """The families exercised by default sweeps and certification."""
    return [
        make_weight("power_shifted", 1),
        make_weight("power_shifted", 2),
        make_weight("power_inverse", 1),
        make_weight("power_inverse", 2),
        make_weight("power_inverse", 4),
        make_weight("exponential"),
    ]


def eval_weight(w, y):
    return w.value(y)


def eval_weight_derivative(w, y):
    return w.derivative(y)


# --------------------------------------------------------------------------
# admissibility
# --------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    weight: str
    y_max: float
    samples: int
    checks: dict[str, bool]
    bound_constants: list[float]
    minimal_alpha: float
    alpha_hint: float
    worst_violation: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]

    def raise_for_failure(self):
        if not self.passed:
            raise WeightAssumptionError(f"{self.weight} violates: {', '.join(self.failures)}")

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "passed": self.passed,
            "failures": self.failures,
            "checks": dict(self.checks),
            "bound_constants": list(self.bound_constants),
            "minimal_alpha": self.minimal_alpha,
            "alpha_hint": self.alpha_hint,
            "worst_violation": dict(self.worst_violation),
            "y_max": self.y_max,
            "samples": self.samples,
        }


def iterated_weight_operators(w, k_max: int = 5) -> list[Callable]:
    """Closed forms of ((1+y)^2 d/dy)^k [(1+y) w(y)] for k = 0..k_max."""
    y = sp.Symbol("y", real=True)
    expr = (1 + y) * w.sympy_expr(y)
    fns = []
    for _ in range(k_max + 1):
        fns.append(sp.lambdify(y, sp.simplify(expr), "numpy"))
        expr = (1 + y) ** 2 * sp.diff(expr, y)
    return fns


def sample_points(y_max: float, samples: int) -> np.ndarray:
    """Log-spaced in 1 + y over (-1/2, y_max], always containing 0 and 1."""
    s = np.geomspace(0.5 + 1e-9, 1.0 + y_max, samples)
    y = np.concatenate([s - 1.0, [0.0, 1.0, y_max]])
    return np.unique(y)


def certify_weight(w, y_max: float = 1e4, samples: int = 2000, tol: float = 1e-8) -> AdmissibilityReport:
    """Check the structural assumptions on ``w`` over a sampled grid."""
    if y_max < 2:
        raise ValueError("y_max must be at least 2")
    if samples < 100:
        raise ValueError("samples must be at least 100")
    y = sample_points(y_max, samples)
    checks: dict[str, bool] = {}
    worst: dict[str, float] = {}

    with np.errstate(over="ignore", under="ignore"):
        logw = np.asarray(w.log_value(y), dtype=float)
    checks["positivity"] = bool(np.all(np.isfinite(logw)))
    worst["positivity"] = float(np.min(logw)) if np.all(np.isfinite(logw)) else float("-inf")

    w0 = float(w.value(0.0))
    checks["normalization"] = w0 == 1.0
    worst["normalization"] = abs(w0 - 1.0)

    nonneg = y[y >= 0]
    dw = np.asarray(w._derivative(nonneg), dtype=float)
    worst["monotone_decay"] = float(np.max(dw))
    checks["monotone_decay"] = bool(np.all(np.isfinite(dw)) and worst["monotone_decay"] <= tol)

    bounds = []
    finite = True
    with np.errstate(over="ignore", invalid="ignore"):
        for fn in iterated_weight_operators(w):
            vals = np.asarray(fn(y), dtype=float) * np.ones_like(y)
            finite &= bool(np.all(np.isfinite(vals)))
            bounds.append(float(np.max(np.abs(vals))))
    checks["derivative_bounds"] = finite
    worst["derivative_bounds"] = max(bounds)

    far = y[y >= 1]
    wv = np.asarray(w._value(far), dtype=float)
    dv = np.asarray(w._derivative(far), dtype=float)
    excess = wv - w.alpha_hint * np.sqrt(np.abs(dv))
    worst["weight_vs_derivative"] = float(np.max(excess))
    checks["weight_vs_derivative"] = worst["weight_vs_derivative"] <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.asarray(w.log_value(far)) - 0.5 * np.asarray(w.log_abs_derivative(far))
    minimal_alpha = float(np.exp(np.max(log_ratio))) if np.all(np.isfinite(log_ratio)) else float("inf")

    return AdmissibilityReport(
        weight=w.name,
        y_max=float(y_max),
        samples=int(samples),
        checks=checks,
        bound_constants=bounds,
        minimal_alpha=minimal_alpha,
        alpha_hint=float(w.alpha_hint),
        worst_violation=worst,
    )
