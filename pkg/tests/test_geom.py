import numpy as np
import pytest
from hypothesis import given, settings
from scipy import integrate

from crfkit.geom import (
    apply,
    axis_angle_rotation,
    compose,
    format_rotation,
    is_rotation,
    parse_rotation,
    random_rotation,
    random_rotations,
    rotation_about_z,
    rotation_angle,
)

from conftest import angles, rotations, vec3


def test_rz_zero_is_identity():
    assert np.array_equal(rotation_about_z(0.0), np.eye(3))


def test_rz_quarter_turn():
    np.testing.assert_allclose(apply(rotation_about_z(np.pi / 2), [1, 0, 0]), [0, 1, 0], atol=1e-15)


def test_rz_half_turn():
    np.testing.assert_allclose(apply(rotation_about_z(np.pi), [1, 2, 3]), [-1, -2, 3], atol=1e-15)


def test_random_rotation_deterministic():
    assert np.array_equal(random_rotation(7), random_rotation(7))
    assert not np.array_equal(random_rotation(7), random_rotation(8))


def haar_trace_moment(power):
    # Haar measure on SO(3): rotation angle has density (1 - cos t) / pi on [0, pi]
    value, _ = integrate.quad(lambda t: (1 + 2 * np.cos(t)) ** power * (1 - np.cos(t)) / np.pi, 0, np.pi)
    return value


def test_haar_trace_oracle_matches_quaternion_argument():
    # tr R = 4 w^2 - 1 and E[w^2] = 1/4 for a uniform unit quaternion
    assert haar_trace_moment(0) == pytest.approx(1.0)
    assert haar_trace_moment(1) == pytest.approx(4 * 0.25 - 1, abs=1e-12)
    assert haar_trace_moment(2) == pytest.approx(1.0)


def test_random_rotation_trace_statistics():
    rs = random_rotations(10_000, 2024)
    tr = np.trace(rs, axis1=1, axis2=2)
    # standard error of the mean is 0.01
    assert tr.mean() == pytest.approx(haar_trace_moment(1), abs=0.05)
    assert (tr**2).mean() == pytest.approx(haar_trace_moment(2), abs=0.05)


def test_random_rotation_has_no_preferred_axis():
    rs = random_rotations(10_000, 99)
    # columns of a Haar rotation are uniform on the sphere: mean 0, second moment I/3
    for col in range(3):
        c = rs[:, :, col]
        np.testing.assert_allclose(c.mean(axis=0), 0.0, atol=0.05)
        np.testing.assert_allclose(c.T @ c / len(c), np.eye(3) / 3, atol=0.02)


def test_random_rotations_are_valid():
    assert all(is_rotation(r, 1e-12) for r in random_rotations(500, 3))


@pytest.mark.parametrize(
    "m, expected",
    [
        (np.eye(3), True),
        (np.diag([1.0, 1.0, -1.0]), False),
        (rotation_about_z(0.3), True),
        (2 * np.eye(3), False),
        (np.eye(2), False),
    ],
)
def test_is_rotation(m, expected):
    assert is_rotation(m, 1e-12) is expected


def test_compose_inverse_and_subgroup_closure():
    r = random_rotation(1)
    np.testing.assert_allclose(compose(r, r.T), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(compose(rotation_about_z(0.4), rotation_about_z(1.1)), rotation_about_z(1.5), atol=1e-12)
    assert np.array_equal(apply(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_apply_batches_rows():
    r = random_rotation(5)
    pts = np.arange(12.0).reshape(4, 3)
    np.testing.assert_allclose(apply(r, pts), np.stack([r @ p for p in pts]), atol=1e-12)


@given(angles)
def test_rz_is_rotation(theta):
    assert is_rotation(rotation_about_z(theta), 1e-12)


@given(rotations(), rotations())
def test_group_closure(r1, r2):
    assert is_rotation(compose(r1, r2), 1e-11)


@given(rotations(), vec3)
def test_apply_preserves_norm(r, p):
    assert abs(np.linalg.norm(apply(r, p)) - np.linalg.norm(p)) < 1e-12 * max(1.0, np.linalg.norm(p))


@given(angles, angles)
def test_rz_commute(a, b):
    ra, rb = rotation_about_z(a), rotation_about_z(b)
    assert np.abs(ra @ rb - rb @ ra).max() < 1e-12


@pytest.mark.parametrize("angle", [0.0, 1e-9, 0.3, 2.0, np.pi - 1e-6, np.pi])
def test_rotation_angle_axis_angle(angle):
    r = axis_angle_rotation([1.0, -2.0, 0.5], angle)
    assert rotation_angle(r) == pytest.approx(angle, abs=1e-12, rel=1e-9)


def test_rotation_text_round_trip():
    r = random_rotation(11)
    text = format_rotation(r)
    assert len(text.split()) == 9
    assert np.array_equal(parse_rotation(text), r)
    assert format_rotation(np.eye(3) * (1 - 1e-17), 3) == "1.000 0.000 0.000 0.000 1.000 0.000 0.000 0.000 1.000"
    with pytest.raises(ValueError):
        parse_rotation("1 2 3")
