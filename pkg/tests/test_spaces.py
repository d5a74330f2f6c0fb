import numpy as np
import pytest

from clarklab.errors import DimensionError, InvalidPoint
from clarklab.spaces import H01Grid, L2Truncation, Point, check_coords


def test_l2_inner_norm_dual_are_euclidean():
    s = L2Truncation(3)
    u = np.array([1.0, 2.0, 2.0])
    v = np.array([0.0, 1.0, -1.0])
    assert s.inner(u, v) == 0.0
    assert s.norm(u) == 3.0
    assert np.array_equal(s.to_dual(v), v)


def test_l2_norm_and_inner_operate_rowwise_on_batches():
    s = L2Truncation(2)
    u = np.array([[3.0, 4.0], [1.0, 0.0]])
    v = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert np.allclose(s.norm(u), [5.0, 1.0])
    assert np.allclose(s.inner(u, v), [3.0, 0.0])


def test_h01_mesh_width_and_trapezoid_use_zero_boundary():
    g = H01Grid(9)
    assert g.mesh_width == pytest.approx(0.1)
    # interior ones extend to a tent hitting zero at both ends: area 1 - h
    assert g.trapezoid(np.ones(9)) == pytest.approx(0.9)


def test_h01_norm_matches_smooth_function():
    g = H01Grid(99)
    x = np.linspace(0.0, 1.0, 101)[1:-1]
    u = x * (1.0 - x)
    # int (1 - 2x)^2 = 1/3; piecewise-linear interpolation error is O(h^2)
    assert abs(g.norm(u) ** 2 - 1.0 / 3.0) < g.mesh_width ** 2

    w = np.sin(np.pi * x)
    assert abs(g.norm(w) ** 2 - np.pi ** 2 / 2.0) < 1e-2


def test_h01_riesz_inverts_the_stiffness_action():
    g = H01Grid(40)
    rng = np.random.default_rng(3)
    f = rng.normal(size=40)
    v = g.riesz_of_load(f)
    # the load is assembled with weight h, so K v = h f
    assert np.allclose(g.stiffness_apply(v), g.mesh_width * f, atol=1e-12)


def test_h01_riesz_representative_reproduces_load_pairing():
    # <riesz(f), w>_H01 = integral f w for every grid function w
    g = H01Grid(60)
    rng = np.random.default_rng(4)
    f = rng.normal(size=60)
    v = g.riesz_of_load(f)
    for _ in range(5):
        w = rng.normal(size=60)
        assert g.inner(v, w) == pytest.approx(g.trapezoid(f * w), abs=1e-12)


def test_h01_inner_is_the_stiffness_bilinear_form():
    g = H01Grid(25)
    rng = np.random.default_rng(5)
    u = rng.normal(size=25)
    v = rng.normal(size=25)
    assert g.inner(u, v) == pytest.approx(float(v @ g.stiffness_apply(u)), rel=1e-12)


def test_point_norm_inner_distance():
    s = L2Truncation(3)
    p = Point(np.array([1.0, 0.0, 0.0]), s)
    q = Point(np.array([0.0, 1.0, 0.0]), s)
    assert p.norm() == 1.0
    assert p.inner(q) == 0.0
    assert p.distance_to(q) == pytest.approx(np.sqrt(2.0))


def test_dimension_mismatch_raises():
    s = L2Truncation(3)
    with pytest.raises(DimensionError):
        check_coords(s, np.ones(4))
    with pytest.raises(DimensionError):
        Point(np.ones(2), s)


def test_nonfinite_coordinates_rejected():
    s = L2Truncation(3)
    with pytest.raises(InvalidPoint):
        check_coords(s, np.array([1.0, np.nan, 0.0]))
    with pytest.raises(InvalidPoint):
        Point(np.array([np.inf, 0.0, 0.0]), s)
