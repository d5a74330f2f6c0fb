"""Shooting construction of the nodal family for the sublinear
two-point problem  u'' + |u|^(p-1) u = 0,  u(0) = u(1) = 0,  p in (0,1).

One positive arch is shot from the origin with unit slope; every family
member is an exact rescaling of it:

    w(x) = alpha * u(beta x)  solves the same equation when
    beta^2 = alpha^(p-1),

so compressing the base arch by beta = k and alternating signs across
the k subintervals yields the k-nodal-domain solution with amplitude
factor k^(2/(p-1)).  The nonlinearity is only Hoelder at u = 0, but all
zeros of nontrivial solutions are transversal (the conserved energy
(1/2) u'^2 + |u|^(p+1)/(p+1) is positive), so a standard integrator with
event detection is adequate.

Norms and integrals are Simpson sums over value and derivative samples
taken from the dense integrator output; the first-difference grid norm
would waste four digits of the scaling-law accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .errors import InvalidParams, NoCrossing
from .spaces import H01Grid, Point


def _check_p(p: float):
    if not (0.0 < p < 1.0):
        raise InvalidParams(f"p must lie in (0,1), got {p}")


def slope_scaling_exponent(p: float) -> float:
    """Slope ratio of the rescaled solution: alpha*beta = beta^((p+1)/(p-1))."""
    _check_p(p)
    return (p + 1.0) / (p - 1.0)


def time_scaling_exponent(p: float) -> float:
    """First-zero times scale as T(s1)/T(s2) = (s1/s2)^((1-p)/(1+p));
    larger slope means larger amplitude and, sublinearly, a longer arch."""
    _check_p(p)
    return (1.0 - p) / (1.0 + p)


def energy_scaling_exponent(p: float) -> float:
    """||u_k||^2 = k^((2p+2)/(p-1)) ||u_1||^2."""
    _check_p(p)
    return (2.0 * p + 2.0) / (p - 1.0)


def amplitude_scaling_exponent(p: float) -> float:
    """max|u_k| = k^(2/(p-1)) max|u_1|."""
    _check_p(p)
    return 2.0 / (p - 1.0)


@dataclass
class Trajectory:
    p: float
    slope: float
    t_max: float
    crossing_times: np.ndarray
    sol: object  # dense OdeSolution

    def value(self, t):
        return np.asarray(self.sol(np.asarray(t, dtype=float)))[0]

    def deriv(self, t):
        return np.asarray(self.sol(np.asarray(t, dtype=float)))[1]

    def conserved_energy(self, t):
        u = self.value(t)
        v = self.deriv(t)
        return 0.5 * v * v + np.abs(u) ** (self.p + 1.0) / (self.p + 1.0)


def shoot(p: float, slope: float, t_max: float = 4.0) -> Trajectory:
    """Integrate from u(0)=0, u'(0)=slope with dense output and
    zero-crossing detection up to t_max."""
    _check_p(p)
    if slope == 0.0:
        raise InvalidParams("slope must be nonzero")
    if t_max <= 0.0:
        raise InvalidParams("t_max must be positive")

    def rhs(t, y):
        u, v = y
        return [v, -np.sign(u) * np.abs(u) ** p]

    def crossing(t, y):
        return y[0]
    crossing.terminal = False

    sol = solve_ivp(rhs, (0.0, t_max), [0.0, float(slope)], method="RK45",
                    rtol=1e-12, atol=1e-14, dense_output=True, events=crossing)
    times = sol.t_events[0]
    times = times[times > 1e-12]  # the launch point itself is a zero
    if times.size == 0:
        raise NoCrossing(f"no return to zero before t_max = {t_max}")
    return Trajectory(p=p, slope=float(slope), t_max=t_max,
                      crossing_times=times, sol=sol.sol)


@dataclass
class BaseProfile:
    """The unit-slope arch rescaled to land its first zero at x = 1."""

    p: float
    t1: float       # first zero time of the unit-slope shot
    alpha: float    # amplitude factor t1^(2/(p-1))
    traj: Trajectory

    def value(self, x):
        return self.alpha * self.traj.value(self.t1 * np.asarray(x, dtype=float))

    def deriv(self, x):
        return self.alpha * self.t1 * self.traj.deriv(self.t1 * np.asarray(x, dtype=float))


def base_profile(p: float, t_max: float = 4.0, max_enlarge: int = 6) -> BaseProfile:
    for _ in range(max_enlarge):
        try:
            traj = shoot(p, 1.0, t_max)
            break
        except NoCrossing:
            t_max *= 2.0
    else:
        raise NoCrossing(f"no zero crossing found up to t_max = {t_max}")
    t1 = float(traj.crossing_times[0])
    return BaseProfile(p=p, t1=t1, alpha=t1 ** (2.0 / (p - 1.0)), traj=traj)


@dataclass
class NodalSolution:
    p: float
    k: int
    grid_values: Point
    deriv_values: np.ndarray     # at the same abscissae incl. boundaries
    abscissae: np.ndarray        # 0, interior nodes, 1
    values_full: np.ndarray      # with the boundary zeros
    energy_norm_sq: float
    j_value: float
    nehari_residual: float
    sup_norm: float
    strong_residual: float

    def to_json_dict(self):
        return {
            "p": self.p,
            "k": self.k,
            "energy_norm_sq": self.energy_norm_sq,
            "j_value": self.j_value,
            "nehari_residual": self.nehari_residual,
            "sup_norm": self.sup_norm,
            "strong_residual": self.strong_residual,
        }


def _assemble(p: float, k: int, prof: BaseProfile, grid: H01Grid) -> NodalSolution:
    x = np.concatenate([[0.0], grid.grid, [1.0]])
    s = k * x
    seg = np.minimum(np.floor(s).astype(int), k - 1)
    local = s - seg
    sign = np.where(seg % 2 == 0, 1.0, -1.0)
    amp = float(k) ** (2.0 / (p - 1.0))
    u = amp * sign * prof.value(local)
    du = amp * k * sign * prof.deriv(local)
    u[0] = 0.0
    u[-1] = 0.0

    norm_sq = float(simpson(du * du, x=x))
    pot = float(simpson(np.abs(u) ** (p + 1.0), x=x))
    j_val = 0.5 * norm_sq - pot / (p + 1.0)
    nehari = abs(norm_sq - pot) / norm_sq

    h = grid.mesh_width
    lap = (u[:-2] - 2.0 * u[1:-1] + u[2:]) / (h * h)
    # sign(u)|u|^p, not |u|^(p-1) u: the latter is 0**negative at joints
    strong = float(np.max(np.abs(lap + np.sign(u[1:-1]) * np.abs(u[1:-1]) ** p)))

    return NodalSolution(
        p=p, k=k,
        grid_values=Point(u[1:-1], grid),
        deriv_values=du, abscissae=x, values_full=u,
        energy_norm_sq=norm_sq, j_value=j_val, nehari_residual=nehari,
        sup_norm=float(np.max(np.abs(u))),
        strong_residual=strong,
    )


def base_solution(p: float, grid: H01Grid | None = None) -> NodalSolution:
    grid = grid or H01Grid(2000)
    return _assemble(p, 1, base_profile(p), grid)


def nodal_solution(p: float, k: int, grid: H01Grid | None = None,
                   prof: BaseProfile | None = None) -> NodalSolution:
    """k-nodal-domain solution by exact compression of the base arch."""
    _check_p(p)
    if k < 1:
        raise InvalidParams("k must be >= 1")
    grid = grid or H01Grid(2000)
    prof = prof or base_profile(p)
    return _assemble(p, k, prof, grid)


def nodal_family(p: float, kmax: int, grid: H01Grid | None = None) -> list:
    grid = grid or H01Grid(2000)
    prof = base_profile(p)
    return [_assemble(p, k, prof, grid) for k in range(1, kmax + 1)]


def reshoot_values(p: float, k: int, grid: H01Grid | None = None,
                   prof: BaseProfile | None = None) -> np.ndarray:
    """Cross-check: integrate the ODE directly with the k-solution's
    initial slope over all of [0,1] (no rescaling afterwards) and sample
    the grid abscissae.  Scaling exactness means this should match the
    compressed construction to integrator accuracy."""
    _check_p(p)
    grid = grid or H01Grid(2000)
    prof = prof or base_profile(p)
    slope_1 = prof.alpha * prof.t1     # u_1'(0)
    slope_k = float(k) ** ((p + 1.0) / (p - 1.0)) * slope_1

    def rhs(t, y):
        u, v = y
        return [v, -np.sign(u) * np.abs(u) ** p]

    sol = solve_ivp(rhs, (0.0, 1.0), [0.0, slope_k], method="RK45",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    return np.asarray(sol.sol(grid.grid))[0]
