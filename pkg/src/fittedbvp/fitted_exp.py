"""Fitted scheme for the exponential-layer problem.

On each interval [x_{n-1}, x_n] the coefficients are frozen at the left node,
a_n = a(x_{n-1}) and g_n = g(V_{n-1}), and the frozen equation

    -eps V'' + a_n V' + g_n = 0

is solved exactly:

    V(x) = V_n + c2_n (exp(a_n (x - x_n)/eps) - 1) - (g_n/a_n)(x - x_n).

Requiring V' to be continuous at interior nodes, and the Robin condition at
x = L, gives a three-point scheme with fitting factor

    s_n = eps/(a_n h_n) (1 - exp(-a_n h_n/eps)).

With theta = a_n h_n/eps, decay = exp(-theta), q = 1/s - 1 and
r = 1 - decay/s, interior row n is

    rho_n V_{n-1} - (rho_n + rho_{n+1} decay_{n+1}) V_n + rho_{n+1} decay_{n+1} V_{n+1}
        = (q_n/a_n) g_n + (r_{n+1}/a_{n+1}) g_{n+1},       rho_n = 1/(s_n h_n)

and the last row is

    a_N/(1 - decay_N) (V_N - V_{N-1}) + (eps q_N/a_N) g_N + f(V_N) = 0.

``as_printed_signs=True`` flips the sign of g throughout, which reproduces
formulas derived from  eps V'' - a V' + g = 0  instead. That variant is
inconsistent with the differential equation and exists only to document the
discrepancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MeshError
from .exprlang import differentiate, evaluate
from .mesh import Mesh
from .problems import ExpLayerProblem
from .solution import DiscreteSolution
from .solver import SolveOptions, TridiagonalSystem, picard_solve

_SERIES_CUTOFF = 1e-3


def fitting_factor(epsilon: float, a_n: float, h_n: float) -> float:
    """s = eps/(h a) (1 - exp(-a h/eps)), computed as -expm1(-theta)/theta."""
    if not (epsilon > 0 and a_n > 0 and h_n > 0):
        raise ValueError("fitting_factor needs positive epsilon, a_n and h_n")
    theta = a_n * h_n / epsilon
    return -math.expm1(-theta) / theta


def _q(theta):
    """1/s - 1 = theta/(1 - e^-theta) - 1, accurate as theta -> 0."""
    theta = np.asarray(theta, dtype=np.float64)
    small = theta < _SERIES_CUTOFF
    t = np.where(small, 1.0, theta)
    series = theta / 2 + theta**2 / 12 - theta**4 / 720
    direct = t / -np.expm1(-t) - 1.0
    return np.where(small, series, direct)


def _r(theta):
    """1 - e^-theta/s = 1 - theta/(e^theta - 1), accurate as theta -> 0."""
    theta = np.asarray(theta, dtype=np.float64)
    small = theta < _SERIES_CUTOFF
    t = np.where(small, 1.0, theta)
    series = theta / 2 - theta**2 / 12 + theta**4 / 720
    direct = 1.0 - t * np.exp(-t) / -np.expm1(-t)
    return np.where(small, series, direct)


@dataclass(frozen=True)
class FittedExpCoefficients:
    """Frozen per-interval data; index n-1 holds interval n."""

    epsilon: float
    h: np.ndarray
    a: np.ndarray
    g: np.ndarray
    theta: np.ndarray
    s: np.ndarray
    decay: np.ndarray

    @property
    def q(self):
        return _q(self.theta)

    @property
    def r(self):
        return _r(self.theta)

    @property
    def rho(self):
        return 1.0 / (self.s * self.h)


def exp_coefficients(epsilon: float, mesh: Mesh, a_values, g_values) -> FittedExpCoefficients:
    """Build the frozen data from per-interval a_n and g_n (length N each)."""
    a = np.asarray(a_values, dtype=np.float64)
    g = np.asarray(g_values, dtype=np.float64)
    h = np.asarray(mesh.steps)
    if a.shape != h.shape or g.shape != h.shape:
        raise ValueError(f"need {h.size} per-interval coefficients")
    if np.any(a <= 0):
        raise DomainError("convection coefficient a must be positive on every interval")
    theta = a * h / epsilon
    s = -np.expm1(-theta) / theta
    return FittedExpCoefficients(epsilon, h, a, g, theta, s, np.exp(-theta))


def assemble_exp_rows(
    coeffs: FittedExpCoefficients,
    A: float,
    f_value: float,
    f_slope: float = 0.0,
    g_slope=None,
    iterate=None,
) -> TridiagonalSystem:
    """Assemble the scheme from frozen coefficients.

    ``f_value`` is f(V_N) at the current iterate. With ``g_slope`` (dg/du at
    the left node of each interval) and ``f_slope`` the nonlinear terms are
    replaced by their tangents at ``iterate``, so a linear g and f are
    treated implicitly; otherwise they are simply lagged.
    """
    N = coeffs.h.size
    eps = coeffs.epsilon
    a, g, decay = coeffs.a, coeffs.g, coeffs.decay
    rho = coeffs.rho
    q, r = coeffs.q, coeffs.r

    lower = np.zeros(N + 1)
    diag = np.zeros(N + 1)
    upper = np.zeros(N + 1)
    rhs = np.zeros(N + 1)

    diag[0] = 1.0
    rhs[0] = A

    # interior rows n = 1..N-1 couple interval n (index n-1) and n+1 (index n)
    left_w = q[:-1] / a[:-1]
    right_w = r[1:] / a[1:]
    lower[1:N] = rho[:-1]
    upper[1:N] = rho[1:] * decay[1:]
    diag[1:N] = -(lower[1:N] + upper[1:N])
    rhs[1:N] = left_w * g[:-1] + right_w * g[1:]

    one_minus = -np.expm1(-coeffs.theta[-1])
    c = a[-1] / one_minus
    w = eps * q[-1] / a[-1]
    lower[N] = -c
    diag[N] = c
    rhs[N] = -w * g[-1] - f_value

    if g_slope is not None:
        gs = np.asarray(g_slope, dtype=np.float64)
        V = np.asarray(iterate, dtype=np.float64)
        # g_n depends on V_{n-1}; g_{n+1} on V_n
        lower[1:N] -= left_w * gs[:-1]
        rhs[1:N] -= left_w * gs[:-1] * V[: N - 1]
        diag[1:N] -= right_w * gs[1:]
        rhs[1:N] -= right_w * gs[1:] * V[1:N]
        lower[N] += w * gs[-1]
        rhs[N] += w * gs[-1] * V[N - 1]
    if f_slope:
        diag[N] += f_slope
        rhs[N] += f_slope * np.asarray(iterate, dtype=np.float64)[N]

    return TridiagonalSystem(lower, diag, upper, rhs)


def _check_mesh(p: ExpLayerProblem, mesh: Mesh):
    if abs(mesh.length - p.L) > 1e-12 * p.L:
        raise MeshError(f"mesh ends at {mesh.length!r} but the problem has L = {p.L!r}")


class ExpAssembler:
    """Callable iterate -> TridiagonalSystem for one problem on one mesh.

    ``linearization`` is "tangent" (default) or "lagged"; see
    :func:`assemble_exp_rows`. Both have the same fixed point.
    """

    def __init__(self, p: ExpLayerProblem, mesh: Mesh, linearization="tangent", as_printed_signs=False):
        _check_mesh(p, mesh)
        if linearization not in ("tangent", "lagged"):
            raise ValueError(f"unknown linearization {linearization!r}")
        self.problem = p
        self.mesh = mesh
        self.linearization = linearization
        self.sign = -1.0 if as_printed_signs else 1.0
        eps = p.epsilon
        a = evaluate(p.a, {"x": mesh.nodes[:-1], "eps": eps})
        self.a = np.broadcast_to(a, mesh.steps.shape).copy()
        self._dg = differentiate(p.g, "u")
        self._df = differentiate(p.f_boundary, "u")

    def _bind(self, u):
        return {"u": u, "eps": self.problem.epsilon}

    def coefficients(self, iterate) -> FittedExpCoefficients:
        V = np.asarray(iterate, dtype=np.float64)
        g = self.sign * np.broadcast_to(evaluate(self.problem.g, self._bind(V[:-1])), self.a.shape)
        return exp_coefficients(self.problem.epsilon, self.mesh, self.a, g)

    def __call__(self, iterate) -> TridiagonalSystem:
        V = np.asarray(iterate, dtype=np.float64)
        if V.shape != (len(self.mesh),):
            raise ValueError(f"iterate must have {len(self.mesh)} entries")
        coeffs = self.coefficients(V)
        f_value = evaluate(self.problem.f_boundary, self._bind(float(V[-1])))
        if self.linearization == "lagged":
            return assemble_exp_rows(coeffs, self.problem.A, f_value)
        g_slope = self.sign * np.broadcast_to(evaluate(self._dg, self._bind(V[:-1])), self.a.shape)
        f_slope = evaluate(self._df, self._bind(float(V[-1])))
        return assemble_exp_rows(coeffs, self.problem.A, f_value, f_slope, g_slope, V)


def assemble_exp_system(p: ExpLayerProblem, mesh: Mesh, iterate, linearization="lagged",
                        as_printed_signs=False) -> TridiagonalSystem:
    return ExpAssembler(p, mesh, linearization, as_printed_signs)(iterate)


class ExpSolution(DiscreteSolution):
    """Piecewise exponential-plus-linear reconstruction.

    Per interval: c1 (= V_n - c2), c2 and slope (= -g_n/a_n), with
    V(x) = c1 + c2 exp(a_n (x - x_n)/eps) + slope (x - x_n).
    """

    kind = "exponential"

    def __init__(self, mesh, values, epsilon, a, g):
        super().__init__(mesh, values)
        self.epsilon = epsilon
        self.a = np.asarray(a, dtype=np.float64)
        self.g = np.asarray(g, dtype=np.float64)
        h = mesh.steps
        V = self.values
        theta = self.a * h / epsilon
        self.slope = -self.g / self.a
        self.c2 = (V[1:] - V[:-1] - self.slope * h) / -np.expm1(-theta)
        self.c1 = V[1:] - self.c2

    def _value(self, n, x):
        i = n - 1
        dx = x - self.mesh.nodes[n]
        return self.values[n] + self.c2[i] * np.expm1(self.a[i] * dx / self.epsilon) + self.slope[i] * dx

    def _slope(self, n, x):
        i = n - 1
        dx = x - self.mesh.nodes[n]
        k = self.a[i] / self.epsilon
        return k * self.c2[i] * np.exp(k * dx) + self.slope[i]


def reconstruct_exp(p: ExpLayerProblem, mesh: Mesh, values, as_printed_signs=False) -> ExpSolution:
    _check_mesh(p, mesh)
    V = np.asarray(values, dtype=np.float64)
    a = np.broadcast_to(evaluate(p.a, {"x": mesh.nodes[:-1], "eps": p.epsilon}), mesh.steps.shape)
    g = np.broadcast_to(evaluate(p.g, {"u": V[:-1], "eps": p.epsilon}), mesh.steps.shape)
    if as_printed_signs:
        g = -g
    return ExpSolution(mesh, V, p.epsilon, a, g)


def reconstruct_exp_derivative(sol: ExpSolution, x):
    return sol.derivative(x)


def solve_exp(p: ExpLayerProblem, mesh: Mesh, opts: SolveOptions = SolveOptions(),
              linearization="tangent", as_printed_signs=False, initial=None):
    """Solve the fitted scheme; returns ``(ExpSolution, SolveStats)``."""
    assembler = ExpAssembler(p, mesh, linearization, as_printed_signs)
    if initial is None:
        initial = np.full(len(mesh), float(p.A))
    values, stats = picard_solve(assembler, initial, opts)
    return reconstruct_exp(p, mesh, values, as_printed_signs), stats
