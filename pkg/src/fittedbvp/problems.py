"""Problem records and sampling-based checks of their structural assumptions.

Exponential layer (on [0, L], layer at x = L):

    -eps u'' + a(x) u' + g(u) = 0,   u(0) = A,   eps u'(L) + f(u(L)) = 0

with a >= alpha > 0, g' >= -beta, f' >= 0 and alpha^2 - 4 eps beta >= gamma > 0.

Power layer (on [0, 1], layer at x = 0):

    (eps + x)^2 u'' - f(x, u) = 0,   u(0) = A,   u(1) = B

with df/du >= alpha > 0.

The checks below sample the conditions on finite grids. Passing is necessary
evidence, not a proof.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EvaluationError, InvalidProblemError
from .exprlang import Expression, as_expression, derivative_array, evaluate

DEFAULT_SAMPLES = 257
# derivatives are sampled by central differences, good to roughly 1e-8
_FD_SLACK = 1e-6
SUMMARY_LIMIT = 10


def _check_epsilon(epsilon):
    if not (isinstance(epsilon, (int, float)) and 0.0 < epsilon <= 1.0):
        raise InvalidProblemError(f"epsilon must lie in (0, 1], got {epsilon!r}")


def _check_positive(name, value):
    if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
        raise InvalidProblemError(f"{name} must be a positive finite number, got {value!r}")


def _check_vars(name, expr, allowed):
    extra = expr.free_vars - set(allowed)
    if extra:
        raise InvalidProblemError(
            f"{name} may only depend on {sorted(allowed)}, found {sorted(extra)}"
        )


@dataclass(frozen=True)
class ExpLayerProblem:
    epsilon: float
    a: Expression
    g: Expression
    f_boundary: Expression
    A: float
    L: float = 1.0
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 0.5

    def __post_init__(self):
        for name in ("a", "g", "f_boundary"):
            object.__setattr__(self, name, as_expression(getattr(self, name)))
        _check_epsilon(self.epsilon)
        _check_positive("L", self.L)
        for name in ("alpha", "beta", "gamma"):
            _check_positive(name, getattr(self, name))
        _check_vars("a", self.a, {"x", "eps"})
        _check_vars("g", self.g, {"u", "eps"})
        _check_vars("f_boundary", self.f_boundary, {"u", "eps"})
        if not math.isfinite(self.A):
            raise InvalidProblemError("A must be finite")
        if self.alpha**2 - 4.0 * self.epsilon * self.beta < self.gamma:
            raise InvalidProblemError(
                f"alpha^2 - 4*eps*beta = {self.alpha**2 - 4 * self.epsilon * self.beta:g}"
                f" is below gamma = {self.gamma:g}"
            )

    kind = "exponential"

    def with_epsilon(self, epsilon: float) -> "ExpLayerProblem":
        return dataclasses.replace(self, epsilon=epsilon)

    def a_at(self, x):
        return evaluate(self.a, {"x": x, "eps": self.epsilon})

    def g_at(self, u):
        return evaluate(self.g, {"u": u, "eps": self.epsilon})

    def f_at(self, u):
        return evaluate(self.f_boundary, {"u": u, "eps": self.epsilon})


@dataclass(frozen=True)
class PowLayerProblem:
    epsilon: float
    f: Expression
    A: float
    B: float
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "f", as_expression(self.f))
        _check_epsilon(self.epsilon)
        _check_positive("alpha", self.alpha)
        _check_vars("f", self.f, {"x", "u", "eps"})
        if not (math.isfinite(self.A) and math.isfinite(self.B)):
            raise InvalidProblemError("boundary values must be finite")

    kind = "power"
    L = 1.0

    def with_epsilon(self, epsilon: float) -> "PowLayerProblem":
        return dataclasses.replace(self, epsilon=epsilon)

    def f_at(self, x, u):
        return evaluate(self.f, {"x": x, "u": u, "eps": self.epsilon})


# --------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class Violation:
    condition: str
    point: dict
    observed: float

    def __str__(self):
        where = ", ".join(f"{k}={v:.6g}" for k, v in self.point.items())
        return f"{self.condition} violated at {where} (observed {self.observed:.6g})"


@dataclass
class AssumptionReport:
    violations: list = field(default_factory=list)
    samples: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.passed:
            return f"all assumptions hold on {self.samples} samples"
        lines = [f"{len(self.violations)} violation(s) on {self.samples} samples:"]
        lines += [f"  {v}" for v in self.violations[:SUMMARY_LIMIT]]
        if len(self.violations) > SUMMARY_LIMIT:
            lines.append(f"  ... and {len(self.violations) - SUMMARY_LIMIT} more")
        return "\n".join(lines)


def default_u_range(A: float, B: Optional[float] = None) -> tuple:
    r = 10.0 * (1.0 + abs(A) + abs(B or 0.0))
    return (-r, r)


def _grid(lo, hi, count):
    if count < 2:
        raise ValueError("sample counts must be >= 2")
    if not hi > lo:
        raise ValueError("sample range must be non-degenerate")
    return np.linspace(lo, hi, int(count))


def _at_least(bound):
    """Predicate v >= bound, forgiving finite-difference noise in v."""
    slack = _FD_SLACK * (1.0 + abs(bound))
    return lambda v: v >= bound - slack


def _check_grid(report, condition, points, compute, holds):
    """Evaluate ``compute`` on every sample point (a dict of equal-length
    arrays) and record each sample where ``holds`` fails.

    Evaluation is vectorised; if it raises, the samples are re-evaluated one
    at a time so each failing point is reported on its own.
    """
    count = len(next(iter(points.values())))
    report.samples += count
    try:
        values = np.broadcast_to(np.asarray(compute(points), dtype=np.float64), (count,))
        failed = np.flatnonzero(~holds(values))
        for i in failed:
            report.violations.append(
                Violation(condition, {k: float(v[i]) for k, v in points.items()}, float(values[i]))
            )
        return
    except EvaluationError:
        pass
    for i in range(count):
        point = {k: float(v[i]) for k, v in points.items()}
        try:
            value = float(compute(point))
        except EvaluationError as exc:
            report.violations.append(Violation(f"{condition} (evaluation failed: {exc})", point, math.nan))
            continue
        if not holds(np.float64(value)):
            report.violations.append(Violation(condition, point, value))


def validate_exp_assumptions(
    p: ExpLayerProblem,
    x_samples: int = DEFAULT_SAMPLES,
    u_range: Optional[tuple] = None,
    u_samples: int = DEFAULT_SAMPLES,
) -> AssumptionReport:
    u_range = u_range or default_u_range(p.A)
    xs = _grid(0.0, p.L, x_samples)
    us = _grid(u_range[0], u_range[1], u_samples)
    report = AssumptionReport()
    eps = p.epsilon
    _check_grid(report, f"a(x) >= alpha={p.alpha:g}", {"x": xs},
                lambda pt: evaluate(p.a, {**pt, "eps": eps}),
                _at_least(p.alpha))
    _check_grid(report, f"dg/du >= -beta={-p.beta:g}", {"u": us},
                lambda pt: derivative_array(p.g, "u", {**pt, "eps": eps}),
                _at_least(-p.beta))
    _check_grid(report, "df/du >= 0", {"u": us},
                lambda pt: derivative_array(p.f_boundary, "u", {**pt, "eps": eps}),
                _at_least(0.0))
    slack = p.alpha**2 - 4.0 * eps * p.beta
    report.samples += 1
    if slack < p.gamma:
        report.violations.append(
            Violation(f"alpha^2 - 4*eps*beta >= gamma={p.gamma:g}", {"eps": eps}, slack)
        )
    return report


def validate_pow_assumptions(
    p: PowLayerProblem,
    x_samples: int = DEFAULT_SAMPLES,
    u_range: Optional[tuple] = None,
    u_samples: int = DEFAULT_SAMPLES,
) -> AssumptionReport:
    u_range = u_range or default_u_range(p.A, p.B)
    xs = _grid(0.0, 1.0, x_samples)
    us = _grid(u_range[0], u_range[1], u_samples)
    X, U = np.meshgrid(xs, us, indexing="ij")
    report = AssumptionReport()
    _check_grid(report, f"df/du >= alpha={p.alpha:g}", {"x": X.ravel(), "u": U.ravel()},
                lambda pt: derivative_array(p.f, "u", {**pt, "eps": p.epsilon}),
                _at_least(p.alpha))
    return report
