"""Fitted scheme for the power-layer problem (eps + x)^2 u'' = f(x, u).

With f frozen to f_n = f(x_{n-1}, V_{n-1}) on [x_{n-1}, x_n] the local
solution is

    v(x) = -f_n ln(eps + x) + C1_n x + C2_n,
    C1_n = (f_n/h_n) ln((eps + x_n)/(eps + x_{n-1})) + (V_n - V_{n-1})/h_n.

Continuity of v' at x_n, where both one-sided derivatives carry 1/(eps + x_n),
gives the interior rows

    V_{n-1}/h_n - (1/h_n + 1/h_{n+1}) V_n + V_{n+1}/h_{n+1}
        = (f_{n+1} - f_n)/(eps + x_n) + f_n l_n/h_n - f_{n+1} l_{n+1}/h_{n+1},

l_n being the interval log-ratio, plus Dirichlet rows V_0 = A, V_N = B.
"""

from __future__ import annotations

import numpy as np

from .errors import MeshError
from .exprlang import differentiate, evaluate
from .mesh import Mesh, log_ratios
from .problems import PowLayerProblem
from .solution import DiscreteSolution
from .solver import SolveOptions, TridiagonalSystem, picard_solve


def assemble_pow_rows(epsilon: float, mesh: Mesh, f_values, A: float, B: float,
                      f_slope=None, iterate=None) -> TridiagonalSystem:
    """Assemble from per-interval frozen values f_n (length N).

    With ``f_slope`` (df/du at the left node of each interval) the f-terms are
    linearised about ``iterate`` instead of lagged.
    """
    f = np.asarray(f_values, dtype=np.float64)
    x = mesh.nodes
    h = mesh.steps
    N = mesh.N
    if f.shape != h.shape:
        raise ValueError(f"need {N} per-interval values of f")
    lr = log_ratios(mesh, epsilon)
    inv_h = 1.0 / h
    t = epsilon + x[1:N]

    lower = np.zeros(N + 1)
    diag = np.zeros(N + 1)
    upper = np.zeros(N + 1)
    rhs = np.zeros(N + 1)
    diag[0] = 1.0
    rhs[0] = A
    diag[N] = 1.0
    rhs[N] = B

    lower[1:N] = inv_h[:-1]
    upper[1:N] = inv_h[1:]
    diag[1:N] = -(inv_h[:-1] + inv_h[1:])
    # weights multiplying f_n (interval n) and f_{n+1} in row n
    w_left = lr[:-1] * inv_h[:-1] - 1.0 / t
    w_right = 1.0 / t - lr[1:] * inv_h[1:]
    rhs[1:N] = w_left * f[:-1] + w_right * f[1:]

    if f_slope is not None:
        fs = np.asarray(f_slope, dtype=np.float64)
        V = np.asarray(iterate, dtype=np.float64)
        # f_n depends on V_{n-1}; f_{n+1} on V_n
        lower[1:N] -= w_left * fs[:-1]
        rhs[1:N] -= w_left * fs[:-1] * V[: N - 1]
        diag[1:N] -= w_right * fs[1:]
        rhs[1:N] -= w_right * fs[1:] * V[1:N]
    return TridiagonalSystem(lower, diag, upper, rhs)


class PowAssembler:
    def __init__(self, p: PowLayerProblem, mesh: Mesh, linearization="tangent"):
        if abs(mesh.length - 1.0) > 1e-12:
            raise MeshError("the power-layer problem lives on [0, 1]")
        if linearization not in ("tangent", "lagged"):
            raise ValueError(f"unknown linearization {linearization!r}")
        self.problem = p
        self.mesh = mesh
        self.linearization = linearization
        self._df = differentiate(p.f, "u")

    def _frozen(self, expr, V):
        b = {"x": self.mesh.nodes[:-1], "u": V[:-1], "eps": self.problem.epsilon}
        return np.broadcast_to(evaluate(expr, b), self.mesh.steps.shape)

    def __call__(self, iterate) -> TridiagonalSystem:
        V = np.asarray(iterate, dtype=np.float64)
        if V.shape != (len(self.mesh),):
            raise ValueError(f"iterate must have {len(self.mesh)} entries")
        p = self.problem
        f = self._frozen(p.f, V)
        if self.linearization == "lagged":
            return assemble_pow_rows(p.epsilon, self.mesh, f, p.A, p.B)
        return assemble_pow_rows(p.epsilon, self.mesh, f, p.A, p.B, self._frozen(self._df, V), V)


def assemble_pow_system(p: PowLayerProblem, mesh: Mesh, iterate, linearization="lagged") -> TridiagonalSystem:
    return PowAssembler(p, mesh, linearization)(iterate)


class PowSolution(DiscreteSolution):
    """v(x) = -f_n ln(eps + x) + C1_n x + C2_n on interval n."""

    kind = "power"

    def __init__(self, mesh, values, epsilon, f):
        super().__init__(mesh, values)
        self.epsilon = epsilon
        self.f = np.asarray(f, dtype=np.float64)
        x, h, V = mesh.nodes, mesh.steps, self.values
        self.log_ratio = log_ratios(mesh, epsilon)
        self.C1 = self.f * self.log_ratio / h + (V[1:] - V[:-1]) / h
        self.C2 = V[:-1] + self.f * np.log(epsilon + x[:-1]) - self.C1 * x[:-1]

    def _value(self, n, x):
        i = n - 1
        x0 = self.mesh.nodes[n - 1]
        # anchored at the left node: the ln and linear parts stay O(h)
        return (self.values[n - 1] - self.f[i] * np.log1p((x - x0) / (self.epsilon + x0))
                + self.C1[i] * (x - x0))

    def _slope(self, n, x):
        i = n - 1
        return -self.f[i] / (self.epsilon + x) + self.C1[i]


def reconstruct_pow(p: PowLayerProblem, mesh: Mesh, values) -> PowSolution:
    V = np.asarray(values, dtype=np.float64)
    f = np.broadcast_to(evaluate(p.f, {"x": mesh.nodes[:-1], "u": V[:-1], "eps": p.epsilon}),
                        mesh.steps.shape)
    return PowSolution(mesh, V, p.epsilon, f)


def reconstruct_pow_derivative(sol: PowSolution, x):
    return sol.derivative(x)


def solve_pow(p: PowLayerProblem, mesh: Mesh, opts: SolveOptions = SolveOptions(),
              linearization="tangent", initial=None):
    """Solve the fitted scheme; returns ``(PowSolution, SolveStats)``."""
    assembler = PowAssembler(p, mesh, linearization)
    if initial is None:
        initial = p.A + (p.B - p.A) * mesh.nodes
    values, stats = picard_solve(assembler, initial, opts)
    return reconstruct_pow(p, mesh, values), stats
