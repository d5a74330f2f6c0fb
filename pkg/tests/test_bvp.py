import numpy as np
import pytest
from scipy.special import beta as beta_fn

from clarklab.bvp import (
    amplitude_scaling_exponent,
    base_profile,
    base_solution,
    energy_scaling_exponent,
    nodal_family,
    nodal_solution,
    reshoot_values,
    shoot,
    slope_scaling_exponent,
    time_scaling_exponent,
)
from clarklab.errors import InvalidParams, NoCrossing
from clarklab.spaces import H01Grid


def exact_first_crossing(p):
    # u'' = -u^p from unit slope: energy conservation gives the peak
    # ((p+1)/2)^(1/(p+1)) and the arc time reduces to a beta integral
    umax = ((p + 1.0) / 2.0) ** (1.0 / (p + 1.0))
    return 2.0 * umax * beta_fn(1.0 / (p + 1.0), 0.5) / (p + 1.0)


def exact_arc_energy(p, t1):
    # 1/2 u'^2 + u^{p+1}/(p+1) = 1/2 integrated over the arc, with
    # int u'^2 = int u^{p+1} on the arc, gives int u'^2 = (p+1) t1 / (p+3)
    return (p + 1.0) * t1 / (p + 3.0)


# ---------------------------------------------------------------------------
# shooting

def test_unit_slope_crossing_time_matches_the_beta_integral():
    for p in (0.5, 0.3, 0.7):
        prof = base_profile(p)
        assert prof.t1 == pytest.approx(exact_first_crossing(p), rel=1e-8)
    assert base_profile(0.5).t1 == pytest.approx(2.84748251649887, rel=1e-7)


def test_crossing_time_scales_with_the_slope():
    p = 0.5
    t1 = exact_first_crossing(p)
    for slope in (0.1, 0.01):
        traj = shoot(p, slope, t_max=4.0)
        assert traj.crossing_times[0] == pytest.approx(
            t1 * slope ** time_scaling_exponent(p), rel=1e-7)


def test_shoot_reports_missing_crossings():
    with pytest.raises(NoCrossing):
        shoot(0.5, 1.0, t_max=1.0)  # the arc needs ~2.85 time units


def test_trajectory_vanishes_at_the_reported_crossings():
    traj = shoot(0.5, 0.2, t_max=8.0)
    assert len(traj.crossing_times) >= 1
    assert np.all(np.diff(traj.crossing_times) > 0)
    for tc in traj.crossing_times:
        assert abs(float(traj.sol(tc)[0])) < 1e-9


def test_scaling_exponent_formulas():
    for p in (0.25, 0.5, 0.75):
        assert slope_scaling_exponent(p) == pytest.approx(-(1.0 + p) / (1.0 - p))
        assert time_scaling_exponent(p) == pytest.approx((1.0 - p) / (1.0 + p))
        assert energy_scaling_exponent(p) == pytest.approx(-2.0 * (1.0 + p) / (1.0 - p))
        assert amplitude_scaling_exponent(p) == pytest.approx(-2.0 / (1.0 - p))
    assert slope_scaling_exponent(0.5) == -3.0
    assert energy_scaling_exponent(0.5) == -6.0
    assert amplitude_scaling_exponent(0.5) == -4.0


def test_exponents_reject_bad_p():
    for fn in (slope_scaling_exponent, time_scaling_exponent,
               energy_scaling_exponent, amplitude_scaling_exponent):
        with pytest.raises(InvalidParams):
            fn(1.0)
        with pytest.raises(InvalidParams):
            fn(0.0)


# ---------------------------------------------------------------------------
# nodal solutions on the grid

def test_base_solution_matches_all_closed_forms():
    p = 0.5
    grid = H01Grid(2000)
    sol = base_solution(p, grid)
    t1 = exact_first_crossing(p)
    scale = 1.0 / t1  # compress one arc onto [0, 1]

    assert sol.k == 1
    assert sol.sup_norm == pytest.approx(
        ((p + 1.0) / 2.0) ** (1.0 / (p + 1.0)) * scale ** (2.0 / (1.0 - p)), rel=1e-6)
    energy = exact_arc_energy(p, t1) * scale ** ((3.0 + p) / (1.0 - p))
    assert sol.energy_norm_sq == pytest.approx(energy, rel=1e-6)
    ratio = (1.0 - p) / (2.0 * (p + 1.0))
    assert sol.j_value == pytest.approx(-ratio * energy, rel=1e-6)
    assert sol.nehari_residual < 1e-6
    assert sol.strong_residual < 1e-3
    # boundary values vanish and the interior stays positive
    assert sol.values_full[0] == 0.0 and sol.values_full[-1] == 0.0
    assert np.all(sol.values_full[1:-1] > 0.0)


def test_nodal_family_scales_and_alternates():
    p = 0.5
    grid = H01Grid(2000)
    family = nodal_family(p, 4, grid)
    base = family[0]
    for k, sol in enumerate(family, start=1):
        assert sol.k == k
        assert sol.nehari_residual < 1e-6
        assert sol.j_value == pytest.approx(
            base.j_value * float(k) ** energy_scaling_exponent(p), rel=1e-5)
        assert sol.sup_norm == pytest.approx(
            base.sup_norm * float(k) ** amplitude_scaling_exponent(p), rel=1e-5)
        # k nodal domains = k sign runs of the interior values
        interior = sol.values_full[1:-1]
        signs = np.sign(interior[np.abs(interior) > 1e-12])
        runs = 1 + int(np.sum(np.diff(signs) != 0))
        assert runs == k
    values = [s.j_value for s in family]
    assert values == sorted(values)    # negative, rising toward zero


def test_reshot_solution_matches_the_rescaled_one():
    grid = H01Grid(1000)
    re2 = reshoot_values(0.5, 2, grid)
    sol2 = nodal_solution(0.5, 2, grid)
    assert np.max(np.abs(re2 - sol2.grid_values.coords)) < 1e-5


def test_nodal_solution_validates_inputs():
    with pytest.raises(InvalidParams):
        nodal_solution(0.5, 0)
    with pytest.raises(InvalidParams):
        nodal_solution(1.5, 2)
    with pytest.raises(InvalidParams):
        base_profile(0.0)
