"""Cutoff pseudo-gradient flow and the finite-time deformation map.

The descent field is the normalized gradient gated by two Lipschitz
cutoffs: an energy ramp that vanishes once the value drops to -2d and
saturates above -d, and a distance ramp that vanishes inside the
r-neighborhood of the exterior zero-level cluster and saturates outside
the 2r-neighborhood.  Flowing this field for time 2d/nu_eps moves every
point of [I <= -eps] into [I <= -d] or into the 3r-neighborhood of the
exterior cluster; that inclusion is the tested contract, not an
assumption — violations raise with the offending trace attached.

All gradient bounds (rho, nu, nu_eps) are sampled estimates with a 0.9
safety factor, flagged as empirical; nothing here proves them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DeformationFailure,
    IntegrationError,
    InvalidParams,
    SetupInconsistent,
)
from .functionals import C1, Functional
from .spaces import L2Truncation, Point
from .topology import Cloud


# ---------------------------------------------------------------------------
# synthetic verification functional

class TwoClusterFunctional(Functional):
    """Even radial functional on R^2 with zero-level critical set
    {0} union the unit circle, separated by distance 1.

    With s = |u|^2 the profile is w(s) = s(s-1)^2(s-2): w(0) = w(1) = 0,
    the stationary spheres s = 1 -/+ 1/sqrt(2) carry the only negative
    critical value -1/4, and w < 0 on (0,1) u (1,2) so the zero level set
    of the value is exactly {0, s=1, s=2}.
    """

    def __init__(self):
        self.space = L2Truncation(2)
        self.smoothness = C1
        self.evenness_declared = True

    @staticmethod
    def _w(s):
        return s * (s - 1.0) ** 2 * (s - 2.0)

    @staticmethod
    def _dw(s):
        return 2.0 * (s - 1.0) * (2.0 * s * s - 4.0 * s + 1.0)

    def value_of(self, coords):
        c = np.asarray(coords, dtype=float)
        s = np.sum(c * c, axis=-1)
        return self._w(s)

    def grad_of(self, coords):
        c = np.asarray(coords, dtype=float)
        s = np.sum(c * c, axis=-1)
        return 2.0 * self._dw(s)[..., None] * c


def two_cluster_setup_clouds(circle_samples: int = 64):
    """The synthetic functional with its zero-level partition: interior
    cluster {0}, exterior cluster = unit circle samples (exactly
    symmetric by construction), separation 1 = 2*delta0."""
    if circle_samples % 2:
        raise InvalidParams("need an even number of circle samples for symmetry")
    half = circle_samples // 2
    ang = np.pi * np.arange(half) / half
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    circle = np.concatenate([pts, -pts], axis=0)
    f = TwoClusterFunctional()
    k0i = Cloud(np.zeros((1, 2)), symmetric=True)
    k0e = Cloud(circle, symmetric=True)
    return f, k0i, k0e, 0.5


# ---------------------------------------------------------------------------
# empirical gradient bounds

@dataclass(frozen=True)
class SampleSpec:
    budget: int = 20000
    box_halfwidth: float = 1.6
    rng_seed: int = 0
    rho_ladder: tuple = (0.2, 0.1, 0.05, 0.025, 0.0125)
    nu_floor: float = 1e-3


@dataclass
class BoundsEstimate:
    """Sampled lower-confidence bounds for the gradient on the level
    bands.  nu = 0.9 x inf |grad| over [-rho <= I <= 0] minus the
    r-neighborhood of the whole zero cluster; nu_eps(eps) the same over
    [-rho <= I <= -eps] minus the r-neighborhood of the exterior cluster
    only, capped at nu.  Empirical, not proven."""

    rho: float
    nu: float
    r: float
    nu_floor: float
    sample_values: np.ndarray = field(repr=False)
    sample_residuals: np.ndarray = field(repr=False)
    sample_dist_k0e: np.ndarray = field(repr=False)

    def nu_eps(self, eps: float) -> float:
        if not (0 < eps):
            raise InvalidParams("eps must be positive")
        keep = ((self.sample_values >= -self.rho)
                & (self.sample_values <= -eps)
                & (self.sample_dist_k0e > self.r))
        if not np.any(keep):
            return self.nu
        inf = float(np.min(self.sample_residuals[keep]))
        if inf <= self.nu_floor:
            raise SetupInconsistent(
                f"sampled gradient infimum {inf:.3e} on the eps-band is not "
                f"bounded away from zero (floor {self.nu_floor:.1e})")
        return min(0.9 * inf, self.nu)


def estimate_bounds(f: Functional, k0_cloud: Cloud, k0e_cloud: Cloud, r: float,
                    spec: SampleSpec | None = None) -> BoundsEstimate:
    """Pick rho off a shrinking ladder so that the sampled gradient norm
    over [-rho <= I <= 0] minus N_r(zero cluster) stays above the floor;
    nu is 0.9 x that sampled infimum."""
    if len(k0_cloud) == 0 or len(k0e_cloud) == 0:
        raise InvalidParams("cluster clouds must be nonempty")
    if r <= 0:
        raise InvalidParams("r must be positive")
    spec = spec or SampleSpec()
    rng = np.random.default_rng(spec.rng_seed)
    dim = f.space.dim
    u = rng.uniform(-spec.box_halfwidth, spec.box_halfwidth, size=(spec.budget, dim))
    values = np.asarray(f.value_of(u))
    grads = f.grad_of(u)
    residuals = np.asarray(f.space.norm(grads))
    dist_k0 = np.minimum(cdist(u, k0_cloud.coords).min(axis=1),
                         cdist(u, k0e_cloud.coords).min(axis=1))
    dist_k0e = cdist(u, k0e_cloud.coords).min(axis=1)

    for rho in spec.rho_ladder:
        band = (values >= -rho) & (values <= 0.0) & (dist_k0 > r)
        if not np.any(band):
            continue
        inf = float(np.min(residuals[band]))
        if inf > spec.nu_floor:
            return BoundsEstimate(rho=float(rho), nu=0.9 * inf, r=float(r),
                                  nu_floor=spec.nu_floor,
                                  sample_values=values,
                                  sample_residuals=residuals,
                                  sample_dist_k0e=dist_k0e)
    raise SetupInconsistent(
        "every ladder rho leaves near-critical samples in the band outside "
        "the excluded neighborhoods; the cluster partition does not match "
        "this functional")


# ---------------------------------------------------------------------------
# setup and the cutoff field

@dataclass(frozen=True)
class DeformationSetup:
    f: Functional
    k0i: Cloud
    k0e: Cloud
    delta0: float
    r: float
    rho: float
    nu: float
    nu_eps: float
    d: float
    eps: float

    def __post_init__(self):
        if not (0 < self.r <= self.delta0 / 3.0):
            raise InvalidParams("need 0 < r <= delta0/3")
        sep = float(cdist(self.k0i.coords, self.k0e.coords).min())
        if sep < 2.0 * self.delta0 - 1e-12:
            raise InvalidParams(
                f"cluster separation {sep:.6f} below 2*delta0 = {2 * self.delta0:.6f}")
        d_expected = min(self.rho, self.nu * self.r) / 3.0
        if abs(self.d - d_expected) > 1e-12 * max(1.0, d_expected):
            raise InvalidParams("d must equal min(rho, nu*r)/3")
        if not (0 < self.eps <= self.d / 2.0):
            raise InvalidParams("need 0 < eps <= d/2")
        if not (0 < self.nu_eps <= self.nu):
            raise InvalidParams("need 0 < nu_eps <= nu")
        Cloud(self.k0e.coords, symmetric=True)  # oddness needs a symmetric exterior cloud

    @property
    def t_eps(self) -> float:
        return 2.0 * self.d / self.nu_eps

    def to_json_dict(self):
        return {
            "delta0": self.delta0, "r": self.r, "rho": self.rho, "nu": self.nu,
            "nu_eps": self.nu_eps, "d": self.d, "eps": self.eps, "t_eps": self.t_eps,
            "k0i": self.k0i.to_json_list(), "k0e": self.k0e.to_json_list(),
        }


def make_setup(f: Functional, k0i: Cloud, k0e: Cloud, delta0: float, r: float,
               bounds: BoundsEstimate, eps: float | None = None) -> DeformationSetup:
    d = min(bounds.rho, bounds.nu * r) / 3.0
    if eps is None:
        eps = d / 2.0
    return DeformationSetup(f=f, k0i=k0i, k0e=k0e, delta0=delta0, r=r,
                            rho=bounds.rho, nu=bounds.nu,
                            nu_eps=bounds.nu_eps(eps), d=d, eps=eps)


def _field_batch(setup: DeformationSetup, u: np.ndarray) -> np.ndarray:
    """Cutoff descent field on a batch of rows: phi1 * phi2 * grad/|grad|.
    Exactly zero wherever either cutoff is zero."""
    vals = np.atleast_1d(setup.f.value_of(u))
    phi1 = np.clip((vals + 2.0 * setup.d) / setup.d, 0.0, 1.0)
    dist = cdist(u, setup.k0e.coords).min(axis=1)
    phi2 = np.clip((dist - setup.r) / setup.r, 0.0, 1.0)
    amp = phi1 * phi2
    out = np.zeros_like(u)
    active = amp > 0.0
    if np.any(active):
        g = setup.f.grad_of(u[active])
        gn = np.atleast_1d(setup.f.space.norm(g))
        if np.any(gn < 1e-14):
            raise SetupInconsistent(
                "vanishing gradient inside the active region; the sampled "
                "nu bound was wrong for this functional")
        out[active] = (amp[active] / gn)[:, None] * g
    return out


def pseudo_gradient(setup: DeformationSetup, u: Point) -> Point:
    setup.f._check(u)
    if float(setup.f.value_of(u.coords)) >= 0.0:
        raise InvalidParams("field is defined on the negative-energy region")
    v = _field_batch(setup, u.coords[None, :])[0]
    return Point(v, setup.f.space)


# ---------------------------------------------------------------------------
# flow integration

@dataclass
class FlowTrace:
    times: np.ndarray
    points: np.ndarray      # (len(times), dim)
    energies: np.ndarray

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            dim = self.points.shape[1]
            w.writerow(["time", "energy"] + [f"x{i + 1}" for i in range(dim)])
            for t, e, p in zip(self.times, self.energies, self.points):
                w.writerow([repr(float(t)), repr(float(e))] + [repr(float(c)) for c in p])

    def max_energy_uptick(self) -> float:
        if len(self.energies) < 2:
            return 0.0
        return float(np.max(np.diff(self.energies)))

    def max_speed_ratio(self) -> float:
        if len(self.times) < 2:
            return 0.0
        dt = np.diff(self.times)
        dp = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(np.max(dp / dt))


def _rk4_step(setup, u, h):
    k1 = -_field_batch(setup, u)
    k2 = -_field_batch(setup, u + 0.5 * h * k1)
    k3 = -_field_batch(setup, u + 0.5 * h * k2)
    k4 = -_field_batch(setup, u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow_batch(setup: DeformationSetup, seeds: np.ndarray, t_final: float,
               err_tol: float = 1e-11):
    """Integrate all rows to t_final with step-doubling control on a
    shared step (max row error governs).  Returns the terminal rows plus
    the worst energy uptick and speed ratio seen across the whole batch."""
    if t_final < 0:
        raise InvalidParams("flow time must be nonnegative")
    u = np.array(seeds, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    h_max = 0.01 * setup.r
    h = h_max
    t = 0.0
    energy = np.atleast_1d(setup.f.value_of(u))
    max_uptick = 0.0
    max_speed = 0.0
    while t < t_final - 1e-15:
        h = min(h, t_final - t)
        full = _rk4_step(setup, u, h)
        half = _rk4_step(setup, _rk4_step(setup, u, 0.5 * h), 0.5 * h)
        err = float(np.max(np.linalg.norm(full - half, axis=1))) if len(u) else 0.0
        if err > err_tol and h > 1e-12:
            h *= 0.5
            continue
        step_len = np.linalg.norm(half - u, axis=1)
        max_speed = max(max_speed, float(np.max(step_len)) / h if len(u) else 0.0)
        u = half
        t += h
        e_new = np.atleast_1d(setup.f.value_of(u))
        max_uptick = max(max_uptick, float(np.max(e_new - energy)))
        energy = e_new
        if err < 0.1 * err_tol:
            h = min(h * 1.5, h_max)
        if h <= 1e-12:
            raise IntegrationError(f"step size collapsed at t = {t:.6f}")
    return u, max_uptick, max_speed


def flow(setup: DeformationSetup, u: Point, t_final: float,
         err_tol: float = 1e-11) -> FlowTrace:
    """Single-seed flow with the full trace recorded at accepted steps."""
    setup.f._check(u)
    if float(setup.f.value_of(u.coords)) >= 0.0:
        raise InvalidParams("flow starts in the negative-energy region")
    if t_final < 0:
        raise InvalidParams("flow time must be nonnegative")
    y = u.coords[None, :].copy()
    h_max = 0.01 * setup.r
    h = h_max
    t = 0.0
    times = [0.0]
    points = [y[0].copy()]
    energies = [float(setup.f.value_of(y[0]))]
    while t < t_final - 1e-15:
        h = min(h, t_final - t)
        full = _rk4_step(setup, y, h)
        half = _rk4_step(setup, _rk4_step(setup, y, 0.5 * h), 0.5 * h)
        err = float(np.max(np.abs(full - half)))
        if err > err_tol:
            if h <= 1e-12:
                raise IntegrationError(
                    f"step size collapsed at t = {t:.6f}",
                )
            h *= 0.5
            continue
        y = half
        t += h
        times.append(t)
        points.append(y[0].copy())
        energies.append(float(setup.f.value_of(y[0])))
        if err < 0.1 * err_tol:
            h = min(h * 1.5, h_max)
    return FlowTrace(times=np.array(times), points=np.array(points),
                     energies=np.array(energies))


def _meets_contract(setup, coords, slack=1e-9):
    val = float(setup.f.value_of(coords))
    dist = float(cdist(coords[None, :], setup.k0e.coords).min())
    return val <= -setup.d + slack or dist < 3.0 * setup.r


def eta_epsilon(setup: DeformationSetup, u: Point) -> Point:
    """Time-T deformation of a single point of [I <= -eps]; the output is
    checked against the target inclusion and failures carry the trace."""
    setup.f._check(u)
    if float(setup.f.value_of(u.coords)) > -setup.eps:
        raise InvalidParams("deformation input must satisfy I(u) <= -eps")
    trace = flow(setup, u, setup.t_eps)
    out = trace.points[-1]
    if not _meets_contract(setup, out):
        raise DeformationFailure(
            f"deformation output has I = {float(setup.f.value_of(out)):.6f} > -d "
            f"and sits {float(cdist(out[None, :], setup.k0e.coords).min()):.6f} "
            f"from the exterior cluster (3r = {3 * setup.r:.6f}); the sampled "
            "nu_eps was too optimistic",
            trace=trace)
    return Point(out, setup.f.space)


def eta_epsilon_batch(setup: DeformationSetup, seeds: np.ndarray):
    """Batched deformation; on contract violation the first offending
    seed is re-run with a trace and raised."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    vals = np.atleast_1d(setup.f.value_of(seeds))
    if np.any(vals > -setup.eps):
        raise InvalidParams("all deformation inputs must satisfy I(u) <= -eps")
    out, max_uptick, max_speed = flow_batch(setup, seeds, setup.t_eps)
    for i in range(out.shape[0]):
        if not _meets_contract(setup, out[i]):
            eta_epsilon(setup, Point(seeds[i], setup.f.space))  # raises with trace
            raise DeformationFailure("contract violated in batch but not in re-run")
    return out, max_uptick, max_speed


def eta_epsilon_with_retry(setup: DeformationSetup, u: Point, retries: int = 3):
    """Halve the empirical nu_eps (doubling the flow time) after each
    contract failure; returns (point, setup_used)."""
    current = setup
    for _ in range(retries + 1):
        try:
            return eta_epsilon(current, u), current
        except DeformationFailure:
            current = replace(current, nu_eps=current.nu_eps / 2.0)
    raise DeformationFailure(
        f"contract still failing after {retries} nu_eps halvings")
