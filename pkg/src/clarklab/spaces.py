"""Ambient spaces for the finite truncations.

Two space tags are supported:

* ``L2Truncation(dim)``  -- coordinate vectors with the Euclidean inner
  product.  Used by the coordinate model, where the first coordinate is
  the parameter t and the rest are the sequence entries.
* ``H01Grid(nodes)``     -- interior nodal values of a uniform grid on
  (0, 1) with zero boundary conditions.  The inner product is the
  discrete Dirichlet form, so norms approximate the H^1_0 norm and
  gradients of functionals are Riesz representatives with respect to it.

All vector operations accept batches: arrays of shape (..., dim).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import DimensionError, InvalidPoint


@dataclass(frozen=True)
class L2Truncation:
    dim: int

    def inner(self, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def norm(self, u):
        return np.linalg.norm(np.asarray(u), axis=-1)

    def to_dual(self, g):
        """Euclidean partial derivatives of a functional with gradient g."""
        return np.asarray(g, dtype=float)

    def __str__(self):
        return f"l2-truncation(dim={self.dim})"


@dataclass(frozen=True)
class H01Grid:
    """Uniform grid on (0,1): ``nodes`` interior points, spacing 1/(nodes+1).

    A vector holds the interior values only; the boundary values are
    pinned to zero.  norm(u)^2 = sum over cells of ((u_{i+1}-u_i)/h)^2 * h,
    the sum including both boundary cells.
    """

    nodes: int
    mesh_width: float = field(default=0.0)

    def __post_init__(self):
        h = 1.0 / (self.nodes + 1)
        if self.mesh_width == 0.0:
            object.__setattr__(self, "mesh_width", h)
        elif abs(self.mesh_width - h) > 1e-14:
            raise DimensionError(
                f"mesh_width {self.mesh_width} inconsistent with {self.nodes} nodes"
            )

    @property
    def dim(self):
        return self.nodes

    @cached_property
    def grid(self):
        """Interior node abscissae."""
        h = self.mesh_width
        return h * np.arange(1, self.nodes + 1)

    @cached_property
    def _chol(self):
        # banded Cholesky factor of the stiffness matrix (1/h) tridiag(-1,2,-1)
        h = self.mesh_width
        ab = np.zeros((2, self.nodes))
        ab[0, 1:] = -1.0 / h
        ab[1, :] = 2.0 / h
        return cholesky_banded(ab, lower=False)

    def inner(self, u, v):
        h = self.mesh_width
        du = np.diff(np.asarray(u), axis=-1, prepend=0.0, append=0.0)
        dv = np.diff(np.asarray(v), axis=-1, prepend=0.0, append=0.0)
        return np.sum(du * dv, axis=-1) / h

    def norm(self, u):
        h = self.mesh_width
        du = np.diff(np.asarray(u), axis=-1, prepend=0.0, append=0.0)
        return np.sqrt(np.sum(du * du, axis=-1) / h)

    def stiffness_apply(self, u):
        """A u with A = (1/h) tridiag(-1, 2, -1); the map from Riesz
        representatives to coordinate partial derivatives."""
        u = np.asarray(u, dtype=float)
        h = self.mesh_width
        padded = np.concatenate(
            [np.zeros(u.shape[:-1] + (1,)), u, np.zeros(u.shape[:-1] + (1,))], axis=-1
        )
        return (2.0 * u - padded[..., :-2] - padded[..., 2:]) / h

    def to_dual(self, g):
        return self.stiffness_apply(g)

    def riesz_of_load(self, f):
        """Riesz representative of the L2 load v -> integral(f v), where the
        integral is the trapezoid rule on the grid: solves A g = h f."""
        f = np.asarray(f, dtype=float)
        rhs = self.mesh_width * f
        if rhs.ndim == 1:
            return cho_solve_banded((self._chol, False), rhs)
        flat = rhs.reshape(-1, self.nodes)
        out = np.stack([cho_solve_banded((self._chol, False), row) for row in flat])
        return out.reshape(rhs.shape)

    def trapezoid(self, values):
        """Trapezoid quadrature of nodal values extended by zero boundaries."""
        return self.mesh_width * np.sum(np.asarray(values), axis=-1)

    def __str__(self):
        return f"h01-grid(nodes={self.nodes})"


SpaceTag = L2Truncation | H01Grid


def check_coords(space, coords):
    coords = np.asarray(coords, dtype=float)
    if coords.shape[-1] != space.dim:
        raise DimensionError(
            f"expected {space.dim} coordinates, got {coords.shape[-1]}"
        )
    if not np.all(np.isfinite(coords)):
        raise InvalidPoint("coordinates must be finite")
    return coords


@dataclass(frozen=True, eq=False)
class Point:
    """A point of a tagged space; coordinates are a read-only float array."""

    coords: np.ndarray
    space: SpaceTag

    def __post_init__(self):
        coords = check_coords(self.space, self.coords)
        if coords.ndim != 1:
            raise InvalidPoint("a Point holds a single coordinate vector")
        coords = coords.copy()
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    def norm(self):
        return float(self.space.norm(self.coords))

    def inner(self, other: "Point"):
        _require_same_space(self, other)
        return float(self.space.inner(self.coords, other.coords))

    def distance_to(self, other: "Point"):
        _require_same_space(self, other)
        return float(self.space.norm(self.coords - other.coords))

    def __neg__(self):
        return Point(-self.coords, self.space)

    def __repr__(self):
        return f"Point({np.array2string(self.coords, precision=6, threshold=8)}, {self.space})"


def _require_same_space(a: Point, b: Point):
    if a.space != b.space:
        raise DimensionError(f"space mismatch: {a.space} vs {b.space}")
