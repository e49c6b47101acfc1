"""Fitted difference schemes for singularly perturbed two-point BVPs.

Two problem families are covered: an exponential boundary layer at x = L for
-eps u'' + a(x) u' + g(u) = 0 with a Robin-type condition there, and a power
layer at x = 0 for (eps + x)^2 u'' = f(x, u) with Dirichlet data.
"""

from .errors import (
    BVPError, ConfigError, DomainError, EvaluationError, ExpressionError, ExprSyntaxError,
    InvalidProblemError, MeshError, NonFiniteError, SingularSystemError,
)
from .exprlang import Expression, parse
from .fitted_exp import solve_exp
from .fitted_pow import solve_pow
from .mesh import Mesh, power_layer_mesh, uniform_mesh
from .problems import ExpLayerProblem, PowLayerProblem
from .solver import SolveOptions, SolveStats, TridiagonalSystem, sweep

__all__ = [
    "BVPError", "ConfigError", "DomainError", "EvaluationError", "ExpressionError",
    "ExprSyntaxError", "InvalidProblemError", "MeshError", "NonFiniteError",
    "SingularSystemError", "Expression", "parse", "solve_exp", "solve_pow", "Mesh",
    "power_layer_mesh", "uniform_mesh", "ExpLayerProblem", "PowLayerProblem",
    "SolveOptions", "SolveStats", "TridiagonalSystem", "sweep",
]
__version__ = "0.1.0"
