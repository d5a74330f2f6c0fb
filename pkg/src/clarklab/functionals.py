"""Functional interface, finite-difference gradient checks, and the
Palais-Smale style sequence diagnostic.

A Functional evaluates to a real number and exposes a gradient that is the
Riesz representative of its derivative with respect to the inner product of
its space: I'(u)v = <gradient(u), v>.  Consequently the coordinate partial
derivatives of I equal space.to_dual(gradient(u)), which is what the central
difference check compares against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EmptyInput, InvalidPoint
from .spaces import Point, SpaceTag, check_coords

C1 = "C1"
C1_NOT_C2 = "C1_not_C2"


class Functional:
    """Base class; subclasses implement value_of / grad_of on raw arrays.

    Both accept batches of shape (..., dim).  evaluate / gradient are the
    Point-typed wrappers with validation.
    """

    space: SpaceTag
    smoothness: str = C1
    evenness_declared: bool = False

    def value_of(self, coords):
        raise NotImplementedError

    def grad_of(self, coords):
        raise NotImplementedError

    def kink_gaps(self, coords):
        """Per-coordinate distance to the nearest loss of second-order
        smoothness, or None for functionals smooth everywhere.  Used by the
        finite-difference check to skip coordinates sitting on a kink."""
        return None

    def evaluate(self, point: Point) -> float:
        self._check(point)
        return float(self.value_of(point.coords))

    def gradient(self, point: Point) -> Point:
        self._check(point)
        return Point(self.grad_of(point.coords), self.space)

    def residual(self, coords) -> float:
        """Norm of the gradient in the space norm (= dual norm of I')."""
        coords = check_coords(self.space, coords)
        return float(self.space.norm(self.grad_of(coords)))

    def _check(self, point: Point):
        if not isinstance(point, Point):
            raise InvalidPoint("expected a Point")
        if point.space != self.space:
            raise DimensionError(f"point lives in {point.space}, functional in {self.space}")


@dataclass
class RelErrorReport:
    """Outcome of a central-difference check at one point."""

    max_rel_error: float
    per_coordinate: np.ndarray
    skipped: list = field(default_factory=list)  # (index, reason) pairs
    step: float = 0.0

    @property
    def checked_fraction(self):
        n = len(self.per_coordinate)
        return (n - len(self.skipped)) / n if n else 0.0


def fd_gradient_check(functional: Functional, point: Point, step: float = 1e-6) -> RelErrorReport:
    """Central differences against space.to_dual(gradient).

    Coordinates within 10*step of a kink locus of the functional are
    reported in ``skipped`` rather than checked; the error would reflect
    the missing second derivative, not a wrong gradient.
    """
    functional._check(point)
    u = point.coords.copy()
    dim = u.shape[0]
    dual = functional.space.to_dual(functional.grad_of(u))
    gaps = functional.kink_gaps(u)

    fd = np.zeros(dim)
    skipped = []
    for i in range(dim):
        if gaps is not None and gaps[i] < 10.0 * step:
            skipped.append((i, "kink-proximity"))
            continue
        e = np.zeros(dim)
        e[i] = step
        fd[i] = (functional.value_of(u + e) - functional.value_of(u - e)) / (2.0 * step)

    scale = max(float(np.max(np.abs(dual))), 1e-12)
    per = np.abs(fd - dual) / scale
    for i, _ in skipped:
        per[i] = 0.0
    return RelErrorReport(
        max_rel_error=float(np.max(per)) if dim else 0.0,
        per_coordinate=per,
        skipped=skipped,
        step=step,
    )


@dataclass
class PSReport:
    """Diagnostic of a finite sequence against a target critical level.

    Everything is computed on a finite truncation, so the clustering
    statement is necessarily about the truncated space; the note records
    that limitation explicitly.
    """

    target_level: float
    value_trace: np.ndarray
    residual_trace: np.ndarray
    cluster_points: list
    has_convergent_subsequence: bool
    values_converge: bool
    residuals_vanish: bool
    note: str


def ps_diagnostic(functional: Functional, sequence, level: float, tol: float = 1e-6) -> PSReport:
    """Tail behaviour of values and residuals of a sequence of Points.

    The tail is the last quarter of the sequence (at least one element).
    Cluster points are found by union-find on the tail with pairwise
    distance threshold tol; a cluster counts as convergent when its
    diameter is below tol.
    """
    if len(sequence) == 0:
        raise EmptyInput("ps_diagnostic needs a non-empty sequence")
    for p in sequence:
        functional._check(p)

    coords = np.stack([p.coords for p in sequence])
    values = functional.value_of(coords)
    residuals = functional.space.norm(functional.grad_of(coords))

    m = len(sequence)
    tail = coords[-max(1, m // 4):]
    tail_vals = values[-max(1, m // 4):]
    tail_res = residuals[-max(1, m // 4):]

    values_converge = bool(np.max(np.abs(tail_vals - level)) <= tol)
    residuals_vanish = bool(np.max(tail_res) <= tol)

    # single-linkage clusters on the tail
    k = len(tail)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    dists = np.linalg.norm(tail[:, None, :] - tail[None, :, :], axis=-1)
    for i in range(k):
        for j in range(i + 1, k):
            if dists[i, j] <= tol:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[ra] = rb

    clusters = {}
    for i in range(k):
        clusters.setdefault(find(i), []).append(i)

    space = functional.space
    cluster_points = []
    convergent = False
    for members in clusters.values():
        diam = float(np.max(dists[np.ix_(members, members)]))
        rep = Point(tail[members].mean(axis=0), space)
        cluster_points.append(rep)
        if diam <= tol:
            convergent = True

    if values_converge and residuals_vanish:
        note = (
            f"sequence is consistent with a PS sequence at level {level:g} "
            "on this finite truncation; clustering on a truncation cannot "
            "certify compactness of the full problem"
        )
    else:
        why = []
        if not values_converge:
            why.append("values do not settle at the level")
        if not residuals_vanish:
            why.append(f"residuals stay above tol (min tail residual {np.min(tail_res):.3g})")
        note = f"not a PS sequence at level {level:g}: " + "; ".join(why)

    return PSReport(
        target_level=level,
        value_trace=values,
        residual_trace=residuals,
        cluster_points=cluster_points,
        has_convergent_subsequence=convergent,
        values_converge=values_converge,
        residuals_vanish=residuals_vanish,
        note=note,
    )
