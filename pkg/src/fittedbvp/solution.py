"""Piecewise-defined discrete solutions that can be evaluated anywhere."""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .mesh import Mesh


class DiscreteSolution:
    """Nodal values on a mesh with a per-interval reconstruction.

    Subclasses implement ``_value(n, x)`` and ``_slope(n, x)`` for arrays of
    interval indices ``n`` (1-based) and points ``x`` inside those intervals.
    A point sitting on node x_n belongs to interval n (interval 1 for x_0),
    which fixes the one-sided convention for derivatives at nodes.
    """

    kind = "piecewise"

    def __init__(self, mesh: Mesh, values):
        values = np.array(values, dtype=np.float64)
        if values.shape != (len(mesh),):
            raise ValueError(f"expected {len(mesh)} nodal values, got shape {values.shape}")
        values.setflags(write=False)
        self.mesh = mesh
        self.values = values

    @property
    def nodes(self):
        return self.mesh.nodes

    def interval_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        nodes = self.mesh.nodes
        if np.any(x < 0.0) or np.any(x > nodes[-1]) or not np.all(np.isfinite(x)):
            raise DomainError(f"evaluation point outside [0, {nodes[-1]:g}]")
        return np.maximum(1, np.searchsorted(nodes, x, side="left"))

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        n = self.interval_index(x)
        out = self._value(n, x)
        # nodes reproduce the nodal data bit for bit
        nodes = self.mesh.nodes
        on_right = nodes[n] == x
        on_left = nodes[n - 1] == x
        out = np.where(on_right, self.values[n], out)
        out = np.where(on_left, self.values[n - 1], out)
        return float(out[0]) if scalar else out

    def derivative(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        out = self._slope(self.interval_index(x), x)
        return float(out[0]) if scalar else out

    def derivative_jump(self) -> np.ndarray:
        """V'(x_n-) - V'(x_n+) at interior nodes n = 1..N-1."""
        x = self.mesh.nodes[1:-1]
        n = np.arange(1, self.mesh.N)
        return self._slope(n, x) - self._slope(n + 1, x)

    def _value(self, n, x):
        raise NotImplementedError

    def _slope(self, n, x):
        raise NotImplementedError


class LinearSolution(DiscreteSolution):
    """Piecewise-linear interpolant of nodal values (classical schemes)."""

    kind = "linear"

    def _value(self, n, x):
        xs, v = self.mesh.nodes, self.values
        w = (x - xs[n - 1]) / (xs[n] - xs[n - 1])
        return v[n - 1] + w * (v[n] - v[n - 1])

    def _slope(self, n, x):
        xs, v = self.mesh.nodes, self.values
        return (v[n] - v[n - 1]) / (xs[n] - xs[n - 1])
