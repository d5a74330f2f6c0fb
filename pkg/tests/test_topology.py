import numpy as np
import pytest

from clarklab.errors import (
    EmptyInput,
    InvalidParams,
    NotInGenusFamily,
    OriginMissing,
)
from clarklab.models import clark_model, enumerate_critical_set
from clarklab.topology import (
    Cloud,
    CoordinateSphere,
    FinitePairCloud,
    SymmetricNeighborhood,
    UnionSpec,
    component_of_origin,
    component_of_origin_indices,
    components,
    genus_certificate,
    hausdorff,
    origin_component_stabilization,
)


def gap_cloud():
    # {0} plus the segment [0.5, 1.0] sampled at 0.01 on the line
    seg = np.arange(0.5, 1.0 + 1e-12, 0.01)
    return Cloud(np.concatenate([[0.0], seg])[:, None])


# ---------------------------------------------------------------------------
# components

def test_components_split_and_merge_with_the_scale():
    cloud = gap_cloud()
    # the 0.5 gap exceeds the delta = 0.1 link length: two components
    comps = components(cloud, 0.1)
    assert len(comps) == 2
    sizes = sorted(len(c) for c in comps)
    assert sizes == [1, 51]
    # delta = 0.3 bridges the gap: one component
    assert len(components(cloud, 0.3)) == 1


def test_component_of_origin_and_indices_agree():
    cloud = gap_cloud()
    comp = component_of_origin(cloud, 0.1)
    idx = component_of_origin_indices(cloud, 0.1)
    assert len(comp) == 1
    assert np.array_equal(comp.coords, cloud.coords[idx])
    assert np.array_equal(cloud.coords[idx[0]], np.zeros(1))


def test_component_of_origin_requires_the_origin():
    cloud = Cloud(np.array([[0.5], [0.6]]))
    with pytest.raises(OriginMissing):
        component_of_origin(cloud, 0.2)


def test_components_validate_inputs():
    with pytest.raises(InvalidParams):
        components(gap_cloud(), 0.0)
    with pytest.raises(InvalidParams):
        Cloud(np.array([[np.nan]]))


# ---------------------------------------------------------------------------
# hausdorff distance

def test_hausdorff_known_values():
    a = Cloud(np.array([[0.0, 0.0]]))
    b = Cloud(np.array([[3.0, 4.0]]))
    assert hausdorff(a, b) == 5.0
    c = Cloud(np.array([[0.0, 0.0], [1.0, 0.0]]))
    d = Cloud(np.array([[0.0, 0.0]]))
    assert hausdorff(c, d) == 1.0
    assert hausdorff(d, c) == 1.0  # symmetric by definition
    assert hausdorff(c, c) == 0.0


def test_hausdorff_empty_input_raises():
    with pytest.raises(EmptyInput):
        hausdorff(Cloud(np.zeros((0, 2))), Cloud(np.zeros((1, 2))))


# ---------------------------------------------------------------------------
# genus certificates

def test_sphere_certificate_matches_the_block_dimension():
    cert = genus_certificate(CoordinateSphere(k=3, rho=0.7))
    assert cert.lower == 3 and cert.upper == 3
    with pytest.raises(NotInGenusFamily):
        genus_certificate(CoordinateSphere(k=2, rho=0.0))


def test_finite_pair_cloud_certificate_is_one():
    pts = np.array([[1.0, 0.2], [-1.0, -0.2], [0.3, -1.1], [-0.3, 1.1]])
    cert = genus_certificate(FinitePairCloud(Cloud(pts, symmetric=True)))
    assert cert.lower == 1 and cert.upper == 1


def test_pair_cloud_with_origin_is_rejected():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(NotInGenusFamily):
        genus_certificate(FinitePairCloud(Cloud(pts, symmetric=True)))


def test_asymmetric_cloud_cannot_be_declared_symmetric():
    with pytest.raises(InvalidParams):
        Cloud(np.array([[1.0, 0.0], [0.5, 0.5]]), symmetric=True)


def test_union_certificate_bounds():
    sphere = CoordinateSphere(k=2, rho=1.0)
    pairs = FinitePairCloud(
        Cloud(np.array([[2.0, 0.0], [-2.0, 0.0]]), symmetric=True))
    cert = genus_certificate(UnionSpec(sphere, pairs))
    assert cert.lower == 2
    assert cert.upper == 3


def test_neighborhood_certificate_needs_a_small_radius():
    pairs = FinitePairCloud(
        Cloud(np.array([[1.0, 0.0], [-1.0, 0.0]]), symmetric=True))
    cert = genus_certificate(SymmetricNeighborhood(pairs, 0.25))
    assert cert.lower == 1 and cert.upper == 1
    with pytest.raises(NotInGenusFamily):
        genus_certificate(SymmetricNeighborhood(pairs, 0.5))
    with pytest.raises(NotInGenusFamily):
        genus_certificate(SymmetricNeighborhood(pairs, 1.5))
    with pytest.raises(InvalidParams):
        genus_certificate(SymmetricNeighborhood(pairs, 0.0))


def test_unknown_spec_rejected():
    with pytest.raises(InvalidParams):
        genus_certificate(object())


# ---------------------------------------------------------------------------
# origin-component stabilization

def test_gap_example_stabilizes_to_the_origin_alone():
    report = origin_component_stabilization(gap_cloud(), (0.3, 0.2, 0.1, 0.05))
    assert report.stabilized
    assert report.nested_ok
    assert report.sizes[0] == 52          # delta 0.3 bridges the gap
    assert report.sizes[-1] == 1          # fine scales isolate the origin
    assert np.array_equal(report.stable_cloud.coords, np.zeros((1, 1)))


def test_connected_segment_stabilizes_to_the_whole_cloud():
    seg = np.arange(-1.0, 1.0 + 1e-12, 0.01)[:, None]
    report = origin_component_stabilization(Cloud(seg), (0.3, 0.2, 0.1, 0.05))
    assert report.stabilized
    assert report.sizes == [len(seg)] * 4


def test_model_cloud_stabilizes_to_the_segment_points():
    # branch coordinates sit at least 3^(-2n) = 1/81 off the axis, so any
    # scale below that (but above the segment sample spacing 5e-4) keeps
    # exactly the axis points in the origin component
    model = clark_model(n=2)
    es = enumerate_critical_set(model, z_samples=4001)
    cloud = Cloud(es.coords_array())
    report = origin_component_stabilization(cloud, (0.02, 0.005, 8e-4, 6e-4))
    assert report.stabilized
    # the stable origin component is exactly the points on the t-axis
    # (segment samples plus the two all-zero branch patterns at t = +-1)
    on_axis = np.linalg.norm(cloud.coords[:, 1:], axis=1) == 0.0
    assert report.sizes[-1] == int(np.sum(on_axis))
    assert np.max(np.abs(report.stable_cloud.coords[:, 1:])) == 0.0
    # the coarsest scale bridges to the off-axis branch points
    assert report.sizes[0] > report.sizes[-1]


def test_member_sets_are_nested_and_sizes_monotone():
    rng = np.random.default_rng(8)
    pts = np.concatenate([np.zeros((1, 3)), rng.normal(size=(50, 3))])
    report = origin_component_stabilization(Cloud(pts), (0.9, 0.5, 0.3, 0.1))
    assert report.nested_ok
    assert all(a >= b for a, b in zip(report.sizes, report.sizes[1:]))
    for coarse, fine in zip(report.member_sets, report.member_sets[1:]):
        assert set(fine) <= set(coarse)


def test_stabilization_schedule_validation():
    cloud = gap_cloud()
    with pytest.raises(InvalidParams):
        origin_component_stabilization(cloud, ())
    with pytest.raises(InvalidParams):
        origin_component_stabilization(cloud, (0.1, 0.2))
    with pytest.raises(InvalidParams):
        origin_component_stabilization(cloud, (0.1, -0.05))


def test_single_scale_schedule_counts_as_stabilized():
    report = origin_component_stabilization(gap_cloud(), (0.05,))
    assert report.stabilized
    assert report.sizes == [1]
