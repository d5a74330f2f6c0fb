"""Model functionals with fully known critical structure.

Three families live here, all even, bounded below, and C1 but not C2:

* ``clark_model``      -- a coordinate model on R^(n+1).  A point is
  (t, x_1, ..., x_n) and

      I(t, x) = 1/2 sum x_j^2
                - 2/3 sum 3^(-j) (a_plus(t) (x_j)_+^{3/2} + a_minus(t) (x_j)_-^{3/2})
                + phi(t),

  with a_plus = 2 + mu, a_minus = 2 - mu, a C1 odd profile mu that climbs
  from -1 to 1 across [-1, 1] and clamps outside, and a quadratic penalty
  phi vanishing on [-1, 1].  Every critical point is known in closed form:
  the segment {(t, 0): |t| <= 1} plus, at t = +-1, the sign-pattern branch
  points x_j in {0, 3^(-2j) a_plus(t)^2, -3^(-2j) a_minus(t)^2}.  The
  profile used here is the circular arc mu(t) = (2/pi)(t sqrt(1-t^2)
  + arcsin t); its derivative decays like sqrt(1-|t|) near the clamps,
  which keeps the branch points reachable by descent flows at tight
  residual tolerances (a sine profile flattens too fast in t and leaves
  the flow stranded an order of magnitude outside the oracle tolerance).

* ``sublinear_energy`` -- the Dirichlet energy minus a sublinear potential
  on an H01 grid:  J(u) = 1/2 ||u||^2 - 1/(p+1) integral |u|^(p+1),
  p in (0, 1).  Critical points solve u'' + |u|^(p-1) u = 0 with zero
  boundary values.

* ``wrapper_functional`` -- a radial recomposition of J whose critical
  values in (0, infinity) sit on spheres:  I(u) = 1 - cos(2 pi ||u||^2)
  for ||u|| <= 1 and I(u) = J((||u||^2 - 1) u) outside.  The origin is an
  isolated critical point at level 0 and the spheres ||u||^2 = 1/2 and
  ||u||^2 = 1 are critical with values 2 and 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams
from .functionals import C1_NOT_C2, Functional
from .spaces import H01Grid, L2Truncation, Point

LABEL_Z = "Z"
LABEL_N = "N"
LABEL_NEG_N = "-N"
LABEL_OTHER = "other"


# ---------------------------------------------------------------------------
# profile and penalty

def mu_parts(t):
    """The odd C1 ramp and its derivative, vectorized.

    mu(t) = (2/pi) (t sqrt(1 - t^2) + arcsin t) on [-1, 1], clamped to
    +-1 outside; mu'(t) = (4/pi) sqrt(1 - t^2) inside, 0 outside.
    """
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, -1.0, 1.0)
    root = np.sqrt(np.maximum(1.0 - tc * tc, 0.0))
    mu = (2.0 / np.pi) * (tc * root + np.arcsin(tc))
    dmu = np.where(np.abs(t) < 1.0, (4.0 / np.pi) * root, 0.0)
    return mu, dmu


def phi_parts(t):
    """Quadratic clamp penalty (t -+ 1)^2 outside [-1, 1] and its derivative."""
    t = np.asarray(t, dtype=float)
    up = np.maximum(t - 1.0, 0.0)
    dn = np.minimum(t + 1.0, 0.0)
    return up * up + dn * dn, 2.0 * up + 2.0 * dn


@dataclass(frozen=True)
class ModelParams:
    """Truncation dimension for the coordinate model."""

    n: int = 4

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParams(f"truncation dimension must be >= 1, got {self.n}")

    @property
    def weights(self):
        return 3.0 ** -np.arange(1, self.n + 1)

    def branch_magnitudes(self, t):
        """Positive-branch and negative-branch |x_j| at parameter t:
        3^(-2j) a_plus(t)^2 and 3^(-2j) a_minus(t)^2."""
        mu, _ = mu_parts(t)
        w2 = self.weights ** 2
        return (2.0 + mu) ** 2 * w2, (2.0 - mu) ** 2 * w2


class ClarkModel(Functional):
    smoothness = C1_NOT_C2
    evenness_declared = True

    def __init__(self, params: ModelParams):
        self.params = params
        self.space = L2Truncation(params.n + 1)
        self._w = params.weights

    def value_of(self, coords):
        coords = np.asarray(coords, dtype=float)
        t, x = coords[..., 0], coords[..., 1:]
        mu, _ = mu_parts(t)
        phi, _ = phi_parts(t)
        xp = np.maximum(x, 0.0)
        xn = np.maximum(-x, 0.0)
        sp = np.sum(self._w * xp ** 1.5, axis=-1)
        sn = np.sum(self._w * xn ** 1.5, axis=-1)
        quad = 0.5 * np.sum(x * x, axis=-1)
        return quad - (2.0 / 3.0) * ((2.0 + mu) * sp + (2.0 - mu) * sn) + phi

    def grad_of(self, coords):
        coords = np.asarray(coords, dtype=float)
        t, x = coords[..., 0], coords[..., 1:]
        mu, dmu = mu_parts(t)
        _, dphi = phi_parts(t)
        xp = np.maximum(x, 0.0)
        xn = np.maximum(-x, 0.0)
        g = np.empty_like(coords)
        g[..., 1:] = x - self._w * (
            (2.0 + mu)[..., None] * np.sqrt(xp) - (2.0 - mu)[..., None] * np.sqrt(xn)
        )
        g[..., 0] = -(2.0 / 3.0) * dmu * np.sum(self._w * (xp ** 1.5 - xn ** 1.5), axis=-1) + dphi
        return g

    def kink_gaps(self, coords):
        # second derivatives fail at x_j = 0 and at the clamp corners t = +-1
        coords = np.asarray(coords, dtype=float)
        gaps = np.abs(coords).copy()
        gaps[0] = min(abs(coords[0] - 1.0), abs(coords[0] + 1.0))
        return gaps


def clark_model(params: ModelParams | None = None, n: int | None = None) -> ClarkModel:
    if params is None:
        params = ModelParams(n=n if n is not None else 4)
    elif n is not None and n != params.n:
        raise InvalidParams("pass either params or n, not conflicting values")
    return ClarkModel(params)


# ---------------------------------------------------------------------------
# the known critical set

@dataclass(frozen=True, eq=False)
class CriticalPoint:
    point: Point
    value: float
    residual: float
    label: str
    sign_pattern: str | None = None
    non_isolated: bool = False

    def to_json_dict(self):
        c = self.point.coords
        return {
            "t": float(c[0]),
            "x": [float(v) for v in c[1:]],
            "value": self.value,
            "label": self.label,
            "pattern": self.sign_pattern,
        }


def _pattern_string(signs):
    return "".join({1: "+", 0: "0", -1: "-"}[s] for s in signs)


def _branch_point(model: ClarkModel, t: float, signs) -> CriticalPoint:
    pos, neg = model.params.branch_magnitudes(t)
    x = np.where(np.array(signs) > 0, pos, 0.0) - np.where(np.array(signs) < 0, neg, 0.0)
    coords = np.concatenate([[t], x])
    value = float(model.value_of(coords))
    residual = model.residual(coords)
    label = LABEL_N if t > 0 else LABEL_NEG_N
    return CriticalPoint(
        point=Point(coords, model.space),
        value=value,
        residual=residual,
        label=label,
        sign_pattern=_pattern_string(signs),
    )


@dataclass
class EnumeratedCriticalSet:
    """Closed-form critical set of the coordinate model at truncation n.

    ``points`` is canonically sorted by value, then lexicographically by
    coordinates.  The zero segment is represented by ``z_samples`` evenly
    spaced parameter values.
    """

    n: int
    points: list

    def with_label(self, label):
        return [p for p in self.points if p.label == label]

    def coords_array(self, labels=None):
        pts = self.points if labels is None else [p for p in self.points if p.label in labels]
        return np.stack([p.point.coords for p in pts])

    def to_json_dict(self):
        return {"n": self.n, "points": [p.to_json_dict() for p in self.points]}


def enumerate_critical_set(model: ClarkModel, z_samples: int = 201) -> EnumeratedCriticalSet:
    """All branch points at t = +-1 plus a sampling of the zero segment.

    Branch points come in 3^n sign patterns at t = 1 (label N) and their
    negations at t = -1 (label -N).  Every returned point has gradient
    residual below 1e-12 by construction of the branch formulas.
    """
    if z_samples < 2:
        raise InvalidParams("z_samples must be at least 2")
    params = model.params
    pts = []
    for signs in itertools.product((1, 0, -1), repeat=params.n):
        pts.append(_branch_point(model, 1.0, signs))
        pts.append(_branch_point(model, -1.0, tuple(-s for s in signs)))
    for t in np.linspace(-1.0, 1.0, z_samples):
        coords = np.concatenate([[t], np.zeros(params.n)])
        pts.append(
            CriticalPoint(
                point=Point(coords, model.space),
                value=float(model.value_of(coords)),
                residual=model.residual(coords),
                label=LABEL_Z,
                sign_pattern=None,
            )
        )
    pts.sort(key=lambda p: (p.value, tuple(p.point.coords)))
    return EnumeratedCriticalSet(n=params.n, points=pts)


class CriticalSetOracle:
    """Distance queries against the closed-form critical set."""

    def __init__(self, model: ClarkModel):
        self.model = model
        signs = list(itertools.product((1, 0, -1), repeat=model.params.n))
        pos, neg = model.params.branch_magnitudes(1.0)
        branch_plus = np.stack(
            [np.where(np.array(s) > 0, pos, 0.0) - np.where(np.array(s) < 0, neg, 0.0) for s in signs]
        )
        plus = np.concatenate([np.ones((len(signs), 1)), branch_plus], axis=1)
        self._branches = np.concatenate([plus, -plus], axis=0)

    def distance(self, coords):
        """Min distance to the zero segment union the branch points; the
        segment distance is exact (no sampling)."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        t, x = coords[:, 0], coords[:, 1:]
        seg = np.sqrt(np.maximum(np.abs(t) - 1.0, 0.0) ** 2 + np.sum(x * x, axis=1))
        diffs = coords[:, None, :] - self._branches[None, :, :]
        branch = np.min(np.linalg.norm(diffs, axis=2), axis=1)
        out = np.minimum(seg, branch)
        return out if out.shape[0] > 1 else float(out[0])


def classify_model_point(model: ClarkModel, coords, residual_tol: float = 1e-8,
                         t_tol: float = 1e-3):
    """Label a solver terminal point by the closed-form structure.

    A point whose x-part is below 10*residual_tol is the zero segment
    (the whole segment is critical, so x is the only discriminator); the
    rest are branch families at t = +-1 up to t_tol, anything else is
    labelled other.
    """
    coords = np.asarray(coords, dtype=float)
    t, x = coords[0], coords[1:]
    if np.linalg.norm(x) < 10.0 * residual_tol and abs(t) <= 1.0 + t_tol:
        return LABEL_Z, None
    signs = np.where(x > 10.0 * residual_tol, 1, np.where(x < -10.0 * residual_tol, -1, 0))
    if abs(t - 1.0) <= t_tol:
        return LABEL_N, _pattern_string(signs)
    if abs(t + 1.0) <= t_tol:
        return LABEL_NEG_N, _pattern_string(signs)
    return LABEL_OTHER, _pattern_string(signs)


# ---------------------------------------------------------------------------
# interior exclusion

@dataclass
class InteriorExclusionReport:
    """Tail-bound table plus a solver cross-check of the interior band."""

    bound_rows: list          # (j0, tail_sum, cap, lower, margin)
    min_margin: float
    seeds_run: int
    converged: int
    violations: list          # coords of converged points breaking the rule
    passed: bool


def verify_no_interior_negatives(model: ClarkModel, seeds: int = 400, delta: float = 1e-3,
                                 x_tol: float = 1e-6, jmax: int | None = None,
                                 seed_rng: int = 0, max_flow_time: float = 2e5):
    """Check the two halves of the interior-exclusion argument.

    Analytically: for every leading index j0, the tail sum
    sum_{j>j0} 27 * 3^(-4j) stays below the cap (2/3) * 3^(-4 j0) while the
    leading term is at least 3^(-4 j0); the margin between tail and cap is
    reported per j0.  Numerically: descent flow is launched from seeded
    boxes and every converged point with |t| < 1 - delta must have zero
    x-part (within x_tol).  Non-converged seeds are counted, not fatal.
    """
    from .solvers import SolveConfig, gradient_flow_solve_batch, model_seed_sampler

    jmax = jmax if jmax is not None else max(model.params.n, 6)
    rows = []
    for j0 in range(1, jmax + 1):
        tail = 27.0 * 3.0 ** (-4 * (j0 + 1)) / (1.0 - 3.0 ** -4)
        cap = (2.0 / 3.0) * 3.0 ** (-4 * j0)
        lower = 3.0 ** (-4 * j0)
        rows.append((j0, tail, cap, lower, 1.0 - tail / cap))
    min_margin = min(r[4] for r in rows)

    rng = np.random.default_rng(seed_rng)
    seed_pts = model_seed_sampler(model.params, rng, seeds)
    cfg = SolveConfig(residual_tol=1e-8, max_flow_time=max_flow_time, seed_rng=seed_rng)
    results = gradient_flow_solve_batch(model, seed_pts, cfg)

    violations = []
    converged = 0
    for res in results:
        if not res.converged:
            continue
        converged += 1
        c = res.coords
        if abs(c[0]) < 1.0 - delta and np.linalg.norm(c[1:]) > x_tol:
            violations.append(c)

    passed = min_margin >= 0.25 and not violations
    return InteriorExclusionReport(
        bound_rows=rows,
        min_margin=min_margin,
        seeds_run=seeds,
        converged=converged,
        violations=violations,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# H01 functionals

class SublinearEnergy(Functional):
    """J(u) = 1/2 ||u||^2 - 1/(p+1) integral |u|^(p+1) on an H01 grid.

    The integral is the trapezoid rule (boundary values are zero).  The
    gradient is the Riesz representative  u - A^(-1)(h |u|^(p-1) u), whose
    zeros coincide with the central-difference discretization of
    u'' + |u|^(p-1) u = 0.
    """

    smoothness = C1_NOT_C2
    evenness_declared = True

    def __init__(self, grid: H01Grid, p: float = 0.5):
        if not 0.0 < p < 1.0:
            raise InvalidParams(f"p must lie in (0, 1), got {p}")
        self.space = grid
        self.p = p

    def value_of(self, coords):
        coords = np.asarray(coords, dtype=float)
        norm2 = self.space.norm(coords) ** 2
        pot = self.space.trapezoid(np.abs(coords) ** (self.p + 1.0))
        return 0.5 * norm2 - pot / (self.p + 1.0)

    def grad_of(self, coords):
        coords = np.asarray(coords, dtype=float)
        load = np.sign(coords) * np.abs(coords) ** self.p
        return coords - self.space.riesz_of_load(load)

    def kink_gaps(self, coords):
        return np.abs(np.asarray(coords, dtype=float))


def sublinear_energy(grid: H01Grid | None = None, p: float = 0.5, nodes: int = 200):
    return SublinearEnergy(grid if grid is not None else H01Grid(nodes), p=p)


class WrapperFunctional(Functional):
    """Radial wrapper around the sublinear energy.

    I(u) = 1 - cos(2 pi ||u||^2) on the unit ball and J((||u||^2 - 1) u)
    outside; value and gradient match on the seam, so I is C1.  Inside the
    ball the gradient is 4 pi sin(2 pi ||u||^2) u; outside it follows by
    the chain rule from the Riesz gradient of J.
    """

    smoothness = C1_NOT_C2
    evenness_declared = True

    def __init__(self, grid: H01Grid, p: float = 0.5):
        self.space = grid
        self.inner_energy = SublinearEnergy(grid, p=p)
        self.p = p

    def value_of(self, coords):
        coords = np.asarray(coords, dtype=float)
        s = self.space.norm(coords) ** 2
        inside = 1.0 - np.cos(2.0 * np.pi * s)
        w = (s - 1.0)[..., None] * coords if coords.ndim > 1 else (s - 1.0) * coords
        outside = self.inner_energy.value_of(w)
        return np.where(s <= 1.0, inside, outside)

    def grad_of(self, coords):
        coords = np.asarray(coords, dtype=float)
        single = coords.ndim == 1
        u = np.atleast_2d(coords)
        s = self.space.norm(u) ** 2
        g = 4.0 * np.pi * np.sin(2.0 * np.pi * s)[:, None] * u
        mask = s > 1.0
        if np.any(mask):
            uo = u[mask]
            so = s[mask]
            w = (so - 1.0)[:, None] * uo
            gj = self.inner_energy.grad_of(w)
            cross = self.space.inner(gj, uo)
            g[mask] = (so - 1.0)[:, None] * gj + 2.0 * cross[:, None] * uo
        return g[0] if single else g

    def kink_gaps(self, coords):
        coords = np.asarray(coords, dtype=float)
        s = float(self.space.norm(coords) ** 2)
        # distance to the seam along each axis, plus the |w_i| kinks outside
        denom = 2.0 * np.abs(coords) + 1e-30
        seam = np.abs(s - 1.0) / denom
        if s > 1.0:
            return np.minimum(seam, np.abs(coords))
        return seam


def wrapper_functional(grid: H01Grid | None = None, p: float = 0.5, nodes: int = 200):
    return WrapperFunctional(grid if grid is not None else H01Grid(nodes), p=p)
