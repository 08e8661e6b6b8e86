"""Rotation helpers: construction, validation, Haar sampling and text I/O.

Rotations are plain ``(3, 3)`` float64 arrays. Points are ``(3,)`` or
``(N, 3)`` arrays; batches of points are always rows.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_rng",
    "rotation_about_z",
    "quaternion_to_matrix",
    "random_rotation",
    "random_rotations",
    "is_rotation",
    "apply",
    "compose",
    "rotation_angle",
    "axis_angle_rotation",
    "format_rotation",
    "parse_rotation",
]


def as_rng(rng=None) -> np.random.Generator:
    """Normalize a seed / Generator / None into a ``numpy.random.Generator``.

    A Generator is returned as-is (and will be advanced by the caller), so pass
    an int seed when the same draw must be reproduced twice.
    """
    return np.random.default_rng(rng)


def rotation_about_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def quaternion_to_matrix(q) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` to rotation matrix. ``q`` is renormalized."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(rng=None) -> np.ndarray:
    """Haar-uniform rotation from a uniformly random unit quaternion.

    A 4D standard normal is rotation-invariant, so its direction is uniform on
    S^3; the double cover S^3 -> SO(3) pushes that forward to Haar measure.
    """
    rng = as_rng(rng)
    while True:
        q = rng.standard_normal(4)
        if np.linalg.norm(q) > 1e-6:
            return quaternion_to_matrix(q)


def random_rotations(n: int, rng=None) -> np.ndarray:
    rng = as_rng(rng)
    return np.stack([random_rotation(rng) for _ in range(n)]) if n else np.empty((0, 3, 3))


def is_rotation(m, tol: float = 1e-12) -> bool:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    if np.abs(m.T @ m - np.eye(3)).max() > tol:
        return False
    return bool(abs(np.linalg.det(m) - 1.0) <= tol)


def apply(r: np.ndarray, p) -> np.ndarray:
    """``R p`` for a single point or each row of an ``(N, 3)`` array."""
    p = np.asarray(p, dtype=float)
    return p @ r.T if p.ndim == 2 else r @ p


def compose(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """``R1 R2`` (apply ``R2`` first)."""
    return r1 @ r2


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of ``R`` in radians, in ``[0, pi]``.

    Uses atan2 of the skew part against the trace so small angles keep full
    relative precision (arccos of the trace alone loses half the digits).
    """
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return float(np.arctan2(np.linalg.norm(skew), np.trace(r) - 1.0))


def axis_angle_rotation(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation by ``angle`` about ``axis`` (right-hand rule)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


def format_rotation(r: np.ndarray, decimals: int | None = None) -> str:
    """Nine whitespace-separated decimals, row-major.

    Full round-trip precision by default; with ``decimals`` the entries are
    rounded to that many places (and -0 printed as 0).
    """
    values = np.asarray(r, dtype=float).ravel()
    if decimals is None:
        return " ".join(f"{x:.17g}" for x in values)
    return " ".join(f"{x:.{decimals}f}" for x in np.round(values, decimals) + 0.0)


def parse_rotation(text: str) -> np.ndarray:
    values = [float(tok) for tok in text.split()]
    if len(values) != 9:
        raise ValueError(f"expected 9 values for a rotation matrix, got {len(values)}")
    return np.array(values).reshape(3, 3)
