import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crfkit.cloud import PointCloud
from crfkit.errors import DegenerateConfiguration, LengthMismatch, QueryAtOrigin
from crfkit.estimation import (
    GEOMETRIC,
    ICP,
    RELATIONAL,
    EstimationReport,
    align,
    average_distance,
    default_relation_maps,
    diameter,
    estimate_rotation,
    icp_rotation,
    kabsch_rotation,
    pose_accuracy,
    radial_features,
    select_anchor_geometric,
    trial_distance,
)
from crfkit.fixtures import asymmetric_cloud
from crfkit.geom import axis_angle_rotation, is_rotation, random_rotation, rotation_about_z
from crfkit.sampling import chamfer

from conftest import random_cloud, rotations


@pytest.fixture(scope="module")
def shape():
    return asymmetric_cloud(1024, 0)


def naive_ad(target, rotated, predicted):
    total, count = 0.0, 0
    for pts, r in zip(rotated, predicted):
        for p, s in zip(target.tolist(), pts.tolist()):
            moved = [sum(r[a][b] * s[b] for b in range(3)) for a in range(3)]
            total += math.dist(p, moved)
            count += 1
    return total / count


# anchors --------------------------------------------------------------------


def test_anchor_scaled_point(rng):
    pts = rng.standard_normal((100, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts[37] *= 1.1
    assert select_anchor_geometric(pts) == 37
    assert select_anchor_geometric(pts @ random_rotation(2).T) == 37


def test_anchor_tie_lowest_index():
    assert select_anchor_geometric(np.eye(3)) == 0


# estimate_rotation ----------------------------------------------------------


def test_report_validation():
    with pytest.raises(ValueError):
        EstimationReport(np.diag([1.0, 1.0, -1.0]), 0, 0, 0.0, True, GEOMETRIC)
    with pytest.raises(ValueError):
        EstimationReport(np.eye(3), 0, 0, -1.0, True, GEOMETRIC)


@settings(max_examples=30, deadline=None)
@given(rotations())
def test_exact_recovery(r):
    cloud = asymmetric_cloud(1024, 0)
    rep = estimate_rotation(cloud.rotated(r), cloud)
    # the estimate maps the source onto the target, which is the inverse of r
    assert np.abs(rep.predicted_rotation - r.T).max() < 1e-8
    assert rep.ad < 1e-8 and rep.correct
    assert rep.anchor_source == rep.anchor_target


def test_exact_recovery_align_round_trip(shape):
    r = random_rotation(5)
    source = shape.rotated(r)
    rep = estimate_rotation(source, shape)
    assert chamfer(align(source, rep.predicted_rotation), shape) < 1e-12


def test_source_equals_target_gives_identity(shape):
    rep = estimate_rotation(shape, shape)
    np.testing.assert_allclose(rep.predicted_rotation, np.eye(3), atol=1e-10)
    assert rep.ad < 1e-12 and rep.method == GEOMETRIC


def test_anchor_on_z_axis_still_reports_rotation(rng):
    pts = rng.standard_normal((50, 3)) * 0.3
    pts[0] = [0.0, 0.0, 2.0]
    cloud = PointCloud(pts, np.tile([0.0, 0.0, 1.0], (50, 1)))
    rep = estimate_rotation(cloud.rotated(rotation_about_z(0.8)), cloud)
    assert rep.anchor_source == 0
    assert is_rotation(rep.predicted_rotation, 1e-9)


def test_anchor_at_origin_raises():
    cloud = PointCloud(np.zeros((4, 3)), np.tile([0.0, 0.0, 1.0], (4, 1)))
    with pytest.raises(QueryAtOrigin):
        estimate_rotation(cloud, cloud)


def test_missing_normals_are_estimated(shape):
    bare = shape.without_normals()
    rep = estimate_rotation(bare, bare)
    np.testing.assert_allclose(rep.predicted_rotation, np.eye(3), atol=1e-10)


def test_relational_exact_recovery(shape):
    r = random_rotation(9)
    rep = estimate_rotation(shape.rotated(r), shape, RELATIONAL)
    assert rep.method == RELATIONAL
    assert np.abs(rep.predicted_rotation - r.T).max() < 1e-8


def test_relational_permutation_equivariance(rng):
    cloud = random_cloud(rng, 40)
    feats = radial_features(cloud)
    maps = default_relation_maps(feats.shape[1], seed=3)
    perm = rng.permutation(40)
    base = estimate_rotation(cloud, cloud, RELATIONAL, features=(feats, feats), maps=maps)
    shuffled = cloud.subset(perm)
    moved = estimate_rotation(shuffled, shuffled, RELATIONAL, features=(feats[perm], feats[perm]), maps=maps)
    assert perm[moved.anchor_source] == base.anchor_source


def test_unknown_method(shape):
    with pytest.raises(ValueError):
        estimate_rotation(shape, shape, "ransac")


# alignment and metrics ------------------------------------------------------


def test_align_identity_and_inverse(shape):
    r = random_rotation(4)
    assert np.array_equal(align(shape, np.eye(3)).points, shape.points)
    back = align(align(shape, r), r.T)
    assert np.abs(back.points - shape.points).max() < 1e-12
    assert np.abs(back.normals - shape.normals).max() < 1e-12


def test_ad_chord_example():
    target = np.array([[1.0, 0.0, 0.0]])
    assert average_distance(target, [np.array([[0.0, 1.0, 0.0]])], [np.eye(3)]) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_ad_zero_for_exact_inverses(shape):
    rs = [random_rotation(s) for s in range(4)]
    rotated = [shape.rotated(r) for r in rs]
    assert average_distance(shape, rotated, [r.T for r in rs]) < 1e-12


def test_ad_matches_double_loop(rng):
    target = rng.standard_normal((64, 3))
    rotated = [target @ random_rotation(rng).T for _ in range(5)]
    predicted = [random_rotation(rng) for _ in range(5)]
    assert abs(average_distance(target, rotated, predicted) - naive_ad(target, rotated, predicted)) < 1e-12


def test_ad_length_mismatch():
    with pytest.raises(LengthMismatch):
        average_distance(np.eye(3), [np.eye(3)], [np.eye(3), np.eye(3)])
    with pytest.raises(LengthMismatch):
        trial_distance(np.eye(3), np.eye(3)[:2], np.eye(3))


@settings(max_examples=25)
@given(rotations(), st.integers(0, 1000))
def test_ad_rotation_consistent(extra, seed):
    rng = np.random.default_rng(seed)
    target = rng.standard_normal((30, 3))
    rotated = [target @ random_rotation(rng).T for _ in range(3)]
    predicted = [random_rotation(rng) for _ in range(3)]
    base = average_distance(target, rotated, predicted)
    moved = average_distance(target @ extra.T, [s @ extra.T for s in rotated], [extra @ r @ extra.T for r in predicted])
    assert abs(moved - base) < 1e-10


@pytest.mark.parametrize("ads, expected", [([0.0, 0.0], 1.0), ([2.0, 2.0], 0.0), ([0.1, 0.3], 0.5)])
def test_pose_accuracy_examples(ads, expected):
    assert pose_accuracy(ads, 2.0) == expected


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.integers(0, 19), st.floats(0, 1))
def test_pose_accuracy_monotone(ads, i, bump):
    i %= len(ads)
    worse = list(ads)
    worse[i] += bump
    assert pose_accuracy(worse, 1.0) <= pose_accuracy(ads, 1.0)


def test_pose_accuracy_needs_positive_diameter():
    with pytest.raises(ValueError):
        pose_accuracy([0.0], 0.0)


def test_diameter(rng):
    pts = rng.standard_normal((300, 3))
    brute = max(math.dist(p, q) for p in pts.tolist() for q in pts.tolist())
    assert diameter(pts) == pytest.approx(brute, abs=1e-12)


# Kabsch and ICP -------------------------------------------------------------


def test_kabsch_exact_recovery(rng):
    p = rng.standard_normal((20, 3))
    r0 = random_rotation(rng)
    assert np.abs(kabsch_rotation(p, p @ r0.T) - r0).max() < 1e-10
    np.testing.assert_allclose(kabsch_rotation(p, p), np.eye(3), atol=1e-12)


def test_kabsch_planar_points_still_identifiable(rng):
    p = rng.standard_normal((20, 3)) * [1.0, 1.0, 0.0]
    r0 = random_rotation(rng)
    assert np.abs(kabsch_rotation(p, p @ r0.T) - r0).max() < 1e-10


@pytest.mark.parametrize("n", [2, 10])
def test_kabsch_degenerate(n):
    p = np.outer(np.arange(1.0, n + 1), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateConfiguration):
        kabsch_rotation(p, p)


def test_kabsch_is_global_optimum(rng):
    p = rng.standard_normal((30, 3))
    q = p @ random_rotation(rng).T + 0.3 * rng.standard_normal((30, 3))
    r = kabsch_rotation(p, q)
    assert is_rotation(r, 1e-9)
    best = np.sum((q - p @ r.T) ** 2)
    for _ in range(100):
        other = random_rotation(rng)
        assert best <= np.sum((q - p @ other.T) ** 2)
    # also beats small perturbations of itself
    for _ in range(20):
        nudged = axis_angle_rotation(rng.standard_normal(3), 1e-3) @ r
        assert best <= np.sum((q - p @ nudged.T) ** 2)


def test_icp_identity_in_one_iteration(shape):
    rep = icp_rotation(shape, shape)
    assert rep.iterations == 1 and rep.method == ICP
    np.testing.assert_allclose(rep.predicted_rotation, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("degrees", [1.0, 5.0, 10.0])
def test_icp_small_rotation(shape, degrees):
    r = axis_angle_rotation(np.random.default_rng(int(degrees)).standard_normal(3), np.radians(degrees))
    rep = icp_rotation(shape.rotated(r), shape)
    assert np.abs(rep.predicted_rotation - r.T).max() < 1e-6
    assert rep.correct


def test_icp_large_rotation_contract_only():
    rng = np.random.default_rng(0)
    elongated = PointCloud(rng.standard_normal((300, 3)) * [3.0, 1.0, 0.5])
    rep = icp_rotation(elongated.rotated(rotation_about_z(np.pi)), elongated, max_iter=50)
    assert is_rotation(rep.predicted_rotation, 1e-9)
    assert 1 <= rep.iterations <= 50 and rep.ad >= 0


def test_icp_via_estimate_rotation(shape):
    rep = estimate_rotation(shape, shape, ICP)
    assert rep.method == ICP and rep.anchor_source is None


def test_icp_rejects_zero_iterations(shape):
    with pytest.raises(ValueError):
        icp_rotation(shape, shape, max_iter=0)
