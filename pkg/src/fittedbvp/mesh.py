"""Meshes on [0, length]: uniform, and the logarithmic power-layer mesh.

The layer mesh x_n = eps*((1 + 1/eps)**(n/N) - 1) equidistributes
ln(eps + x), so every interval carries the same log-ratio ln(1+1/eps)/N.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import MeshError


class Mesh:
    """Strictly increasing nodes x_0 = 0 < x_1 < ... < x_N = length."""

    __slots__ = ("_nodes", "_steps")

    def __init__(self, nodes):
        nodes = np.array(nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 3:
            raise MeshError("a mesh needs at least three nodes (N >= 2)")
        if nodes[0] != 0.0:
            raise MeshError("first node must be 0")
        steps = np.diff(nodes)
        if not np.all(np.isfinite(nodes)) or np.any(steps <= 0):
            raise MeshError("mesh nodes must be finite and strictly increasing")
        nodes.setflags(write=False)
        steps.setflags(write=False)
        self._nodes = nodes
        self._steps = steps

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def steps(self) -> np.ndarray:
        """h_n for n = 1..N, stored at index n-1."""
        return self._steps

    @property
    def N(self) -> int:
        return self._nodes.size - 1

    @property
    def length(self) -> float:
        return float(self._nodes[-1])

    def h(self, n: int) -> float:
        if not 1 <= n <= self.N:
            raise MeshError(f"interval index {n} outside 1..{self.N}")
        return float(self._steps[n - 1])

    def __len__(self):
        return self._nodes.size

    def __repr__(self):
        return f"Mesh(N={self.N}, length={self.length!r})"


def uniform_mesh(length: float, N: int) -> Mesh:
    if not (length > 0 and math.isfinite(length)):
        raise MeshError(f"length must be positive, got {length!r}")
    if int(N) != N or N < 2:
        raise MeshError(f"N must be an integer >= 2, got {N!r}")
    N = int(N)
    nodes = np.arange(N + 1, dtype=np.float64) * (length / N)
    nodes[-1] = length
    return Mesh(nodes)


def power_layer_mesh(epsilon: float, N: int) -> Mesh:
    """Layer-adapted mesh on [0, 1] for the power-law layer at x = 0."""
    if not 0.0 < epsilon <= 1.0:
        raise MeshError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    if int(N) != N or N < 2:
        raise MeshError(f"N must be an integer >= 2, got {N!r}")
    N = int(N)
    t = np.arange(N + 1, dtype=np.float64) / N
    # (1 + 1/eps)**t - 1 == expm1(t*ln1p(1/eps)); raw pow loses x_1 for tiny eps
    nodes = epsilon * np.expm1(t * math.log1p(1.0 / epsilon))
    nodes[0] = 0.0
    nodes[-1] = 1.0
    return Mesh(nodes)


def log_ratio(mesh: Mesh, epsilon: float, n: int) -> float:
    """ln((eps + x_n) / (eps + x_{n-1}))."""
    if not 1 <= n <= mesh.N:
        raise MeshError(f"interval index {n} outside 1..{mesh.N}")
    x = mesh.nodes
    return math.log1p((x[n] - x[n - 1]) / (epsilon + x[n - 1]))


def log_ratios(mesh: Mesh, epsilon: float) -> np.ndarray:
    """Vector of log_ratio for n = 1..N."""
    x = mesh.nodes
    return np.log1p(np.diff(x) / (epsilon + x[:-1]))
