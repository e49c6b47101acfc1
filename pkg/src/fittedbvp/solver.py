"""Tridiagonal sweep and the frozen-coefficient (Picard) iteration around it."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteError, SingularSystemError

log = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class TridiagonalSystem:
    """Row i reads  lower[i]*V[i-1] + diag[i]*V[i] + upper[i]*V[i+1] = rhs[i].

    All four arrays have length N+1; lower[0] and upper[N] are ignored.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=np.float64) for a in (self.lower, self.diag, self.upper, self.rhs)]
        n = arrays[1].shape
        if len(n) != 1 or any(a.shape != n for a in arrays):
            raise ValueError("lower, diag, upper and rhs must be 1-d arrays of equal length")
        arrays[0] = arrays[0].copy()
        arrays[2] = arrays[2].copy()
        arrays[0][0] = 0.0
        arrays[2][-1] = 0.0
        for name, a in zip(("lower", "diag", "upper", "rhs"), arrays):
            if not np.all(np.isfinite(a)):
                bad = int(np.flatnonzero(~np.isfinite(a))[0])
                raise NonFiniteError(f"non-finite {name} entry in row {bad}")
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.diag.size

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        out = self.diag * v
        out[1:] += self.lower[1:] * v[:-1]
        out[:-1] += self.upper[:-1] * v[1:]
        return out

    def residual(self, v) -> np.ndarray:
        return self.matvec(v) - self.rhs

    def row_scale(self, v) -> np.ndarray:
        """sum_j |M_ij| |v_j| + |rhs_i|, the natural size of row i."""
        v = np.abs(np.asarray(v, dtype=np.float64))
        out = np.abs(self.diag) * v + np.abs(self.rhs)
        out[1:] += np.abs(self.lower[1:]) * v[:-1]
        out[:-1] += np.abs(self.upper[:-1]) * v[1:]
        return out

    def relative_residual(self, v) -> float:
        """Max over rows of |residual_i| / row_scale_i (0 for all-zero rows)."""
        r = np.abs(self.residual(v))
        scale = self.row_scale(v)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(scale > 0, r / scale, 0.0)
        return float(ratio.max())

    def to_dense(self) -> np.ndarray:
        n = len(self)
        M = np.diag(self.diag)
        M[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        M[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return M


def sweep(sys: TridiagonalSystem) -> np.ndarray:
    """Solve ``sys`` by forward elimination and back substitution (Thomas)."""
    a = sys.lower.tolist()
    b = sys.diag.tolist()
    c = sys.upper.tolist()
    d = sys.rhs.tolist()
    n = len(b)
    cp = [0.0] * n
    dp = [0.0] * n
    pivot = b[0]
    if abs(pivot) < PIVOT_FLOOR:
        raise SingularSystemError(0, pivot)
    cp[0] = c[0] / pivot
    dp[0] = d[0] / pivot
    for i in range(1, n):
        pivot = b[i] - a[i] * cp[i - 1]
        if abs(pivot) < PIVOT_FLOOR:
            raise SingularSystemError(i, pivot)
        cp[i] = c[i] / pivot
        dp[i] = (d[i] - a[i] * dp[i - 1]) / pivot
    x = [0.0] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    out = np.array(x)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("sweep produced non-finite values")
    return out


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    max_iter: int = 100
    damping: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be an integer >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    final_update_norm: float
    final_residual_norm: float
    converged: bool


def picard_solve(
    assemble: Callable[[np.ndarray], TridiagonalSystem],
    initial,
    opts: SolveOptions = SolveOptions(),
) -> tuple:
    """Iterate V <- (1-d) V + d sweep(assemble(V)) to a fixed point.

    Stops when max|update| <= tol * (1 + max|V|). Returns ``(values, stats)``;
    on hitting ``max_iter`` the iterate with the smallest update is returned
    with ``converged=False``. ``final_residual_norm`` is the relative residual
    (see :meth:`TridiagonalSystem.relative_residual`) of the system assembled
    at the returned iterate.
    """
    V = np.array(initial, dtype=np.float64)
    if not np.all(np.isfinite(V)):
        raise NonFiniteError("initial iterate is not finite")
    best, best_update = V, np.inf
    converged = False
    update = np.inf
    k = 0
    for k in range(1, opts.max_iter + 1):
        target = sweep(assemble(V))
        new = V + opts.damping * (target - V) if opts.damping != 1.0 else target
        if not np.all(np.isfinite(new)):
            raise NonFiniteError(f"iterate {k} is not finite")
        update = float(np.max(np.abs(new - V)))
        V = new
        if update < best_update:
            best, best_update = V, update
        log.debug("picard iteration %d: update %.3e", k, update)
        if update <= opts.tol * (1.0 + float(np.max(np.abs(V)))):
            converged = True
            break
    if not converged:
        V, update = best, best_update
    residual = assemble(V).relative_residual(V)
    return V, SolveStats(k, update, residual, converged)
