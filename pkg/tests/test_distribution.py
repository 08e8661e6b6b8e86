import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crfkit.cloud import PointCloud
from crfkit.distribution import (
    MixtureDistribution,
    build_mixture,
    canonical_frame,
    dirichlet_weights,
    mean_nearest_neighbor_distance,
    sample_point,
    sample_rotation,
    uniform_weights,
)
from crfkit.errors import NormalRadial, TooFewPoints
from crfkit.frames import crf_basis
from crfkit.geom import is_rotation, random_rotation

from conftest import random_cloud, rotations


def brute_sigma(pts):
    total = 0.0
    for i, p in enumerate(pts):
        best = math.inf
        for j, q in enumerate(pts):
            if i != j:
                best = min(best, math.dist(p, q))
        total += best
    return total / len(pts)


def test_sigma_two_points():
    assert build_mixture(np.array([[0.0, 0.0, 0.0], [0.0, 3.0, 4.0]])).sigma == pytest.approx(5.0, abs=1e-15)


def test_sigma_grid_line():
    pts = np.array([[x, 0.0, 0.0] for x in range(4)])
    assert build_mixture(pts).sigma == 1.0


def test_sigma_matches_exhaustive_scan():
    pts = np.random.default_rng(8).standard_normal((1024, 3))
    assert abs(mean_nearest_neighbor_distance(pts) - brute_sigma(pts.tolist())) < 1e-12


def test_sigma_needs_two_points():
    with pytest.raises(TooFewPoints):
        build_mixture(np.zeros((1, 3)))


def test_default_weights_uniform():
    d = build_mixture(np.eye(3))
    np.testing.assert_array_equal(d.weights, np.full(3, 1 / 3))


def test_mixture_validation():
    with pytest.raises(ValueError):
        MixtureDistribution(np.eye(3), 0.0, np.ones(3))
    with pytest.raises(ValueError):
        MixtureDistribution(np.eye(3), 1.0, np.ones(2))
    with pytest.raises(ValueError):
        MixtureDistribution(np.eye(3), 1.0, np.array([1.0, np.nan, 0.0]))


def test_dirichlet_weights_on_simplex():
    w = dirichlet_weights(50, 0.1, 3)
    assert w.shape == (50,) and np.all(w >= 0) and w.sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(w, dirichlet_weights(50, 0.1, 3))
    assert uniform_weights(4).sum() == 1.0


@settings(max_examples=20, deadline=None)
@given(rotations())
def test_sigma_rotation_invariant(r):
    pts = np.random.default_rng(2).standard_normal((100, 3))
    assert abs(build_mixture(pts @ r.T).sigma - build_mixture(pts).sigma) < 1e-12


# sampling -------------------------------------------------------------------

CENTERS = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.5], [-1.0, -1.0, 1.0], [0.3, 0.2, -2.0]])


@pytest.mark.parametrize("k", range(4))
def test_one_hot_collapses_to_center(k):
    d = MixtureDistribution(CENTERS, 1e-15, uniform_weights(4))
    np.testing.assert_allclose(sample_point(d, np.eye(4)[k], 0), CENTERS[k], atol=1e-12)


def test_uniform_collapses_to_centroid():
    d = MixtureDistribution(CENTERS, 1e-15, uniform_weights(4))
    np.testing.assert_allclose(sample_point(d, None, 1), CENTERS.mean(axis=0), atol=1e-10)


def test_monte_carlo_mean_of_one_hot_draw():
    s, k, n = 0.5, 2, 100_000
    d = MixtureDistribution(CENTERS, s, uniform_weights(4))
    w = np.eye(4)[k]
    rng = np.random.default_rng(17)
    total = np.zeros(3)
    for _ in range(n):
        total += sample_point(d, w, rng)
    assert np.abs(total / n - CENTERS[k]).max() < 4 * s / math.sqrt(n)


@pytest.mark.parametrize("covariant", [False, True])
def test_sample_covariance_is_isotropic(covariant):
    s = 0.3
    d = MixtureDistribution(CENTERS, s, uniform_weights(4))
    w = np.array([0.5, 0.2, 0.2, 0.1])
    rng = np.random.default_rng(4)
    draws = np.stack([sample_point(d, w, rng, covariant=covariant) for _ in range(20_000)])
    expected = s**2 * (w @ w) * np.eye(3)
    np.testing.assert_allclose(np.cov(draws.T), expected, atol=0.05 * expected[0, 0])
    np.testing.assert_allclose(draws.mean(axis=0), w @ CENTERS, atol=4 * s * math.sqrt(w @ w / 20_000))


def test_sample_point_deterministic():
    d = build_mixture(CENTERS)
    assert np.array_equal(sample_point(d, None, 9), sample_point(d, None, 9))


def test_sample_point_weight_length():
    with pytest.raises(ValueError):
        sample_point(build_mixture(CENTERS), np.ones(3), 0)


weight_vectors = st.lists(st.floats(-2, 2, allow_nan=False), min_size=4, max_size=4).map(np.array)


@given(weight_vectors, weight_vectors, st.integers(0, 2**32 - 1))
def test_sample_point_linear_in_weights(w1, w2, seed):
    d = build_mixture(CENTERS)
    lhs = sample_point(d, w1 + w2, seed)
    rhs = sample_point(d, w1, seed) + sample_point(d, w2, seed) - sample_point(d, np.zeros(4), seed)
    assert np.abs(lhs - rhs).max() < 1e-12


@settings(deadline=None)
@given(rotations(), st.integers(0, 2**32 - 1))
def test_covariant_sampling(r, seed):
    cloud = random_cloud(np.random.default_rng(6), 50, normals=False)
    d, dr = build_mixture(cloud), build_mixture(cloud.rotated(r))
    a = sample_point(d, None, seed, covariant=True)
    b = sample_point(dr, None, seed, covariant=True)
    assert np.abs(b - r @ a).max() < 1e-10


@settings(deadline=None)
@given(rotations())
def test_canonical_frame_rotates_with_cloud(r):
    pts = random_cloud(np.random.default_rng(7), 30, normals=False).points
    assert np.abs(canonical_frame(pts @ r.T) - r @ canonical_frame(pts)).max() < 1e-10


def test_canonical_frame_undefined_on_line_through_origin():
    pts = np.outer([1.0, -2.0, 3.0, 0.5], [1.0, 2.0, 2.0])
    with pytest.raises(NormalRadial):
        canonical_frame(pts)


def test_world_noise_is_not_pathwise_covariant():
    cloud = random_cloud(np.random.default_rng(6), 50, normals=False)
    r = random_rotation(1)
    a = sample_point(build_mixture(cloud), None, 5)
    b = sample_point(build_mixture(cloud.rotated(r)), None, 5)
    assert np.abs(b - r @ a).max() > 1e-6


# rotations ------------------------------------------------------------------


def test_sample_rotation_one_hot_is_discrete_rotation():
    cloud = random_cloud(np.random.default_rng(10), 20)
    d = MixtureDistribution(cloud.points.copy(), 1e-15, uniform_weights(20))
    for k in (0, 7, 19):
        f = sample_rotation(d, cloud, np.eye(20)[k], 0)
        assert f.query_index == k
        np.testing.assert_allclose(f.basis, crf_basis(cloud.points[k], cloud.normals[k]).basis, atol=1e-9)


def test_sample_rotation_is_rotation():
    cloud = random_cloud(np.random.default_rng(11), 200)
    d = build_mixture(cloud)
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = dirichlet_weights(200, 0.1, rng)
        assert is_rotation(sample_rotation(d, cloud, w, rng).basis, 1e-10)


def test_sample_rotation_needs_normals():
    cloud = random_cloud(np.random.default_rng(11), 10, normals=False)
    with pytest.raises(ValueError):
        sample_rotation(build_mixture(cloud), cloud)


@settings(deadline=None)
@given(rotations(), st.integers(0, 2**32 - 1))
def test_sample_rotation_equivariance(r, seed):
    cloud = random_cloud(np.random.default_rng(12), 60)
    w = dirichlet_weights(60, 0.1, seed)
    a = sample_rotation(build_mixture(cloud), cloud, w, seed, covariant=True)
    rotated = cloud.rotated(r)
    b = sample_rotation(build_mixture(rotated), rotated, w, seed, covariant=True)
    assert b.query_index == a.query_index
    assert np.abs(b.basis - r @ a.basis).max() < 1e-8
