"""Ground truth that does not go through the fitted schemes' formulas.

* closed-form solutions of linear instances of both problems,
* a classical central-difference scheme (the non-fitted baseline),
* fine-mesh references for nonlinear instances,
* numerical checks of the a-priori bounds on u and u'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BVPError
from .exprlang import differentiate, evaluate
from .mesh import Mesh, power_layer_mesh, uniform_mesh
from .problems import ExpLayerProblem, PowLayerProblem
from .solution import DiscreteSolution, LinearSolution
from .solver import SolveOptions, TridiagonalSystem, picard_solve

DEFAULT_N_REF = 2**14
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class SingularOracleError(BVPError):
    pass


def _solve2(M, rhs):
    M = np.asarray(M, dtype=np.float64)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if not math.isfinite(det) or abs(det) <= 1e-14 * np.abs(M).max() ** 2:
        raise SingularOracleError("2x2 boundary system is singular for these parameters")
    return np.linalg.solve(M, rhs)


# --------------------------------------------------------------------------
# closed forms


class LinearExpExact:
    """-eps u'' + a0 u' + b u + c = 0,  u(0) = A,  eps u'(L) + u(L) - K = 0.

    u = k1 exp(lp (x - L)) + k2 exp(lm x) + particular, with lp > 0 > lm the
    characteristic roots; the growing mode is anchored at x = L so nothing
    overflows however small eps is.
    """

    def __init__(self, epsilon, a0, b, c, A, K, L=1.0):
        disc2 = a0 * a0 + 4.0 * epsilon * b
        if a0 <= 0 or disc2 <= 0:
            raise SingularOracleError("characteristic roots are not real and distinct")
        disc = math.sqrt(disc2)
        self.epsilon, self.a0, self.b, self.c, self.L = epsilon, a0, b, c, L
        self.lp = (a0 + disc) / (2.0 * epsilon)
        # product of roots is -b/eps; avoids cancellation in (a0 - disc)
        self.lm = -2.0 * b / (a0 + disc)
        m1_0 = math.exp(-self.lp * L)
        m2_L = math.exp(self.lm * L)
        P0, PL, dPL = self._particular(0.0), self._particular(L), self._dparticular()
        M = [[m1_0, 1.0], [epsilon * self.lp + 1.0, (epsilon * self.lm + 1.0) * m2_L]]
        self.k1, self.k2 = _solve2(M, [A - P0, K - PL - epsilon * dPL])

    def _particular(self, x):
        if self.b != 0:
            return -self.c / self.b + 0.0 * x
        return -(self.c / self.a0) * x

    def _dparticular(self):
        return 0.0 if self.b != 0 else -self.c / self.a0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = (self.k1 * np.exp(self.lp * (x - self.L)) + self.k2 * np.exp(self.lm * x)
               + self._particular(x))
        return float(out) if out.ndim == 0 else out

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = (self.k1 * self.lp * np.exp(self.lp * (x - self.L))
               + self.k2 * self.lm * np.exp(self.lm * x) + self._dparticular())
        return float(out) if out.ndim == 0 else out

    def second_derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = (self.k1 * self.lp**2 * np.exp(self.lp * (x - self.L))
               + self.k2 * self.lm**2 * np.exp(self.lm * x))
        return float(out) if out.ndim == 0 else out


def exact_linear_exp(epsilon, a0, b, c, A, K, L, x):
    """Closed-form solution for a(x) = a0, g(u) = b u + c, f(u) = u - K."""
    return LinearExpExact(epsilon, a0, b, c, A, K, L)(x)


class LinearPowExact:
    """(eps + x)^2 u'' - k u = 0,  u(0) = A,  u(1) = B  (Euler equation in t = eps + x).

    u = k1 (t/(1+eps))^r1 + k2 (t/eps)^r2 with r1,2 = (1 +- sqrt(1 + 4k))/2;
    for k = 1 the exponents are the golden ratio and 1 - golden ratio.
    """

    def __init__(self, epsilon, A, B, k=1.0):
        if k <= -0.25:
            raise SingularOracleError("need 1 + 4k > 0 for real exponents")
        root = math.sqrt(1.0 + 4.0 * k)
        self.epsilon = epsilon
        self.r1 = (1.0 + root) / 2.0
        self.r2 = (1.0 - root) / 2.0
        m1_0 = math.exp(self.r1 * math.log1p(-1.0 / (1.0 + epsilon)))
        m2_1 = math.exp(self.r2 * math.log1p(1.0 / epsilon))
        self.k1, self.k2 = _solve2([[m1_0, 1.0], [1.0, m2_1]], [A, B])

    def _modes(self, x):
        eps = self.epsilon
        m1 = np.exp(self.r1 * np.log1p((x - 1.0) / (1.0 + eps)))
        m2 = np.exp(self.r2 * np.log1p(x / eps))
        return m1, m2

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        m1, m2 = self._modes(x)
        out = self.k1 * m1 + self.k2 * m2
        return float(out) if out.ndim == 0 else out

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        m1, m2 = self._modes(x)
        out = (self.k1 * self.r1 * m1 + self.k2 * self.r2 * m2) / (self.epsilon + x)
        return float(out) if out.ndim == 0 else out

    def second_derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        m1, m2 = self._modes(x)
        t = self.epsilon + x
        out = (self.k1 * self.r1 * (self.r1 - 1) * m1 + self.k2 * self.r2 * (self.r2 - 1) * m2) / t**2
        return float(out) if out.ndim == 0 else out


def exact_linear_pow(epsilon, A, B, x, k=1.0):
    """Closed-form solution for f(x, u) = k u (k = 1: golden-ratio exponents)."""
    return LinearPowExact(epsilon, A, B, k)(x)


def _probe_affine(expr, var, others, points=(-2.0, -0.5, 0.0, 0.75, 3.0)):
    """Return (slope, intercept) if ``expr`` is affine in ``var`` on the probe
    points (and independent of everything else), else None."""
    if expr.free_vars - {var, "eps"}:
        return None
    try:
        vals = [evaluate(expr, {var: p, **others}) for p in points]
    except BVPError:
        return None
    c = vals[points.index(0.0)]
    slope = (vals[-1] - vals[0]) / (points[-1] - points[0])
    for p, v in zip(points, vals):
        if abs(c + slope * p - v) > 1e-12 * (1.0 + abs(v)):
            return None
    return slope, c


def closed_form_for(problem):
    """Closed-form oracle for ``problem`` if it is one of the linear families,
    else None."""
    eps = problem.epsilon
    if isinstance(problem, ExpLayerProblem):
        a = _probe_affine(problem.a, "x", {"eps": eps})
        g = _probe_affine(problem.g, "u", {"eps": eps})
        f = _probe_affine(problem.f_boundary, "u", {"eps": eps})
        if a is None or g is None or f is None or a[0] != 0 or f[0] != 1.0:
            return None
        try:
            return LinearExpExact(eps, a[1], g[0], g[1], problem.A, -f[1], problem.L)
        except SingularOracleError:
            return None
    if isinstance(problem, PowLayerProblem):
        f = _probe_affine(problem.f, "u", {"eps": eps})
        if f is None or f[1] != 0:
            return None
        try:
            return LinearPowExact(eps, problem.A, problem.B, f[0])
        except SingularOracleError:
            return None
    return None


# --------------------------------------------------------------------------
# classical central differences


def _central_weights(mesh: Mesh):
    h = mesh.steps
    hm, hp = h[:-1], h[1:]
    s = hm + hp
    return 2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s), s


class _ClassicalExp:
    def __init__(self, p: ExpLayerProblem, mesh: Mesh, linearization):
        self.p, self.mesh, self.linearization = p, mesh, linearization
        self.a = np.broadcast_to(evaluate(p.a, {"x": mesh.nodes[1:-1], "eps": p.epsilon}),
                                 (mesh.N - 1,))
        self.dg = differentiate(p.g, "u")
        self.df = differentiate(p.f_boundary, "u")

    def __call__(self, V):
        p, mesh, N, eps = self.p, self.mesh, self.mesh.N, self.p.epsilon
        wl, wc, wr, s = _central_weights(mesh)
        b = {"eps": eps}
        lower, diag, upper, rhs = (np.zeros(N + 1) for _ in range(4))
        diag[0], rhs[0] = 1.0, p.A
        lower[1:N] = -eps * wl - self.a / s
        diag[1:N] = -eps * wc
        upper[1:N] = -eps * wr + self.a / s
        g = np.broadcast_to(evaluate(p.g, {**b, "u": V[1:N]}), (N - 1,))
        rhs[1:N] = -g
        # Robin row: a ghost node V_{N+1} removed with the central boundary
        # derivative, so the whole scheme stays central
        hN = mesh.steps[-1]
        aN = float(evaluate(p.a, {"x": mesh.nodes[-1], "eps": eps}))
        kf = 1.0 - aN * hN / (2.0 * eps)
        uN = {**b, "u": float(V[N])}
        lower[N] = -eps / hN
        diag[N] = eps / hN
        rhs[N] = -kf * evaluate(p.f_boundary, uN) - 0.5 * hN * evaluate(p.g, uN)
        if self.linearization == "tangent":
            gs = np.broadcast_to(evaluate(self.dg, {**b, "u": V[1:N]}), (N - 1,))
            diag[1:N] += gs
            rhs[1:N] += gs * V[1:N]
            slope_N = kf * evaluate(self.df, uN) + 0.5 * hN * evaluate(self.dg, uN)
            diag[N] += slope_N
            rhs[N] += slope_N * V[N]
        return TridiagonalSystem(lower, diag, upper, rhs)


class _ClassicalPow:
    def __init__(self, p: PowLayerProblem, mesh: Mesh, linearization):
        self.p, self.mesh, self.linearization = p, mesh, linearization
        self.df = differentiate(p.f, "u")

    def __call__(self, V):
        p, mesh, N = self.p, self.mesh, self.mesh.N
        wl, wc, wr, _ = _central_weights(mesh)
        x = mesh.nodes[1:N]
        t2 = (p.epsilon + x) ** 2
        b = {"eps": p.epsilon, "x": x, "u": V[1:N]}
        lower, diag, upper, rhs = (np.zeros(N + 1) for _ in range(4))
        diag[0], rhs[0] = 1.0, p.A
        diag[N], rhs[N] = 1.0, p.B
        lower[1:N] = t2 * wl
        diag[1:N] = t2 * wc
        upper[1:N] = t2 * wr
        rhs[1:N] = np.broadcast_to(evaluate(p.f, b), (N - 1,))
        if self.linearization == "tangent":
            fs = np.broadcast_to(evaluate(self.df, b), (N - 1,))
            diag[1:N] -= fs
            rhs[1:N] -= fs * V[1:N]
        return TridiagonalSystem(lower, diag, upper, rhs)


def classical_central_scheme(problem, mesh: Mesh, opts: SolveOptions = SolveOptions(),
                             linearization="tangent"):
    """Three-point central differences; returns ``(LinearSolution, SolveStats)``."""
    if isinstance(problem, ExpLayerProblem):
        assemble = _ClassicalExp(problem, mesh, linearization)
        initial = np.full(len(mesh), float(problem.A))
    else:
        assemble = _ClassicalPow(problem, mesh, linearization)
        initial = problem.A + (problem.B - problem.A) * mesh.nodes
    values, stats = picard_solve(assemble, initial, opts)
    return LinearSolution(mesh, values), stats


# --------------------------------------------------------------------------
# fine-mesh reference


def reference_mesh(problem, N: int) -> Mesh:
    if isinstance(problem, ExpLayerProblem):
        return uniform_mesh(problem.L, N)
    return power_layer_mesh(problem.epsilon, N)


def fine_mesh_reference(problem, N_ref: int = DEFAULT_N_REF, opts: Optional[SolveOptions] = None,
                        production_N: Optional[int] = None) -> DiscreteSolution:
    """Fitted-scheme solution on an ``N_ref``-interval mesh (uniform for the
    exponential problem, layer-adapted for the power problem)."""
    from .fitted_exp import solve_exp
    from .fitted_pow import solve_pow

    if production_N is not None and N_ref < 8 * production_N:
        raise ValueError(f"N_ref={N_ref} must be at least 8x the production N={production_N}")
    opts = opts or SolveOptions(tol=1e-12, max_iter=200)
    mesh = reference_mesh(problem, N_ref)
    solve = solve_exp if isinstance(problem, ExpLayerProblem) else solve_pow
    sol, stats = solve(problem, mesh, opts)
    if not stats.converged:
        raise BVPError(f"fine-mesh reference did not converge ({stats.iterations} iterations)")
    return sol


# --------------------------------------------------------------------------
# bound checks


@dataclass(frozen=True)
class BoundCheckReport:
    bound_name: str
    max_violation: float
    sample_count: int
    inferred_constant: float

    @property
    def held(self) -> bool:
        return self.max_violation <= 0.0


def _layer_samples(lo, hi, eps, near_hi, count=1000):
    """Half uniform points, half geometrically graded toward the layer edge."""
    half = count // 2
    uniform = np.linspace(lo, hi, count - half)
    span = hi - lo
    offsets = eps * np.logspace(-3.0, math.log10(max(span / eps, 1e-3 * 1.0001)), half)
    offsets = np.minimum(offsets, span)
    graded = hi - offsets if near_hi else lo + offsets
    return np.sort(np.concatenate([uniform, graded]))


def _report(name, ratio, constant, count):
    inferred = float(np.max(ratio)) if ratio.size else 0.0
    if constant is None:
        violation = 0.0
    else:
        violation = inferred - constant
    return BoundCheckReport(name, violation, count, inferred)


def check_derivative_bound_exp(sol, p: ExpLayerProblem, constant: Optional[float] = None,
                               samples: int = 1000) -> BoundCheckReport:
    """|V'(x)| <= C (1 + exp(alpha (x - L)/eps)/eps); infers the smallest C."""
    eps = p.epsilon
    x = _layer_samples(0.0, p.L, eps, near_hi=True, count=samples)
    weight = 1.0 + np.exp(p.alpha * (x - p.L) / eps) / eps
    ratio = np.abs(sol.derivative(x)) / weight
    return _report("|u'| <= C[1 + exp(alpha(x-L)/eps)/eps]", ratio, constant, x.size)


def check_derivative_bound_pow(sol, p: PowLayerProblem, constant: Optional[float] = None,
                               samples: int = 1000) -> BoundCheckReport:
    """|v'(x)| <= C/(eps + x); infers the smallest C."""
    eps = p.epsilon
    x = _layer_samples(0.0, 1.0, eps, near_hi=False, count=samples)
    ratio = np.abs(sol.derivative(x)) * (eps + x)
    return _report("|u'| <= C/(eps+x)", ratio, constant, x.size)


def check_solution_bound_pow(sol, p: PowLayerProblem) -> BoundCheckReport:
    """max|V| <= max|f(x, 0)|/alpha, for zero boundary data only."""
    if p.A != 0 or p.B != 0:
        raise ValueError("the solution bound is only stated for A = B = 0")
    x = sol.mesh.nodes
    f0 = np.abs(np.broadcast_to(evaluate(p.f, {"x": x, "u": 0.0, "eps": p.epsilon}), x.shape))
    bound = float(f0.max()) / p.alpha
    vmax = float(np.max(np.abs(sol.values)))
    if bound > 0:
        inferred = vmax / bound
    else:
        inferred = 0.0 if vmax == 0 else math.inf
    return BoundCheckReport("max|u| <= max|f(x,0)|/alpha", vmax - bound, x.size, inferred)


def constants_stable(reports: Sequence[BoundCheckReport], factor: float = 3.0) -> bool:
    """True when the inferred constants agree within ``factor``."""
    c = np.array([r.inferred_constant for r in reports], dtype=np.float64)
    if np.all(c == 0):
        return True
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        return False
    return float(c.max() / c.min()) <= factor
