"""Polar and composed centrifugal reference frames.

A polar frame (PCRF) at query ``q`` has its third axis ``w`` along ``q``, its
first axis ``u`` horizontal (``z x w`` normalized) and ``v = w x u`` pointing
towards the north pole. Expressing points in that frame removes rotations
about the world z-axis, and turns any rotation into a rotation about the
frame's own z-axis. Chaining a second polar frame, built from the query's
normal expressed in the first one, removes the remaining angle: the composed
frame (CRF) rotates exactly with the object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import NORMAL_TOL, PointCloud
from .errors import DegenerateNeighborhood, NormalRadial, QueryAtOrigin
from .geom import rotation_about_z
from .sampling import knn_array

__all__ = [
    "DEFAULT_EPS",
    "Frame",
    "pcrf_basis",
    "pcrf_transform",
    "crf_basis",
    "crf_transform",
    "estimate_normals",
    "orient_normals",
    "factor_rotation",
    "factor_residual",
    "subgroup_map",
]

DEFAULT_EPS = 1e-8

_FALLBACK_U = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis stored as the columns ``[u v w]`` of ``basis``."""

    basis: np.ndarray
    kind: str = "polar"
    query_index: int | None = None
    normal: np.ndarray | None = None
    degenerate: bool = False

    @property
    def u(self) -> np.ndarray:
        return self.basis[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.basis[:, 1]

    @property
    def w(self) -> np.ndarray:
        return self.basis[:, 2]

    def transform(self, p) -> np.ndarray:
        """Coordinates ``B^T p`` of one point or of each row of ``(N, 3)``."""
        p = np.asarray(p, dtype=float)
        return p @ self.basis if p.ndim == 2 else self.basis.T @ p


def _polar_columns(q: np.ndarray, eps: float) -> tuple[np.ndarray, bool]:
    norm = np.linalg.norm(q)
    if not norm > eps:
        raise QueryAtOrigin(f"query {q} has norm {norm:.3g} <= eps={eps:g}")
    w = q / norm
    rho = np.hypot(w[0], w[1])
    if rho > eps:
        u = np.array([-w[1] / rho, w[0] / rho, 0.0])
        degenerate = False
    else:
        # w is (anti)parallel to z: z x w vanishes, so pin u to the y-axis
        # (projected off w, which only matters when w is within eps of the axis)
        u = _FALLBACK_U - w[1] * w
        u = u / np.linalg.norm(u)
        degenerate = True
    v = np.cross(w, u)
    return np.column_stack([u, v, w]), degenerate


def pcrf_basis(q, eps: float = DEFAULT_EPS, query_index: int | None = None) -> Frame:
    """Polar centrifugal frame of query point ``q``.

    Raises QueryAtOrigin when ``||q|| <= eps``. When ``q`` lies on the z-axis
    the frame falls back to ``u = (0, 1, 0)`` and ``degenerate`` is set.
    """
    basis, degenerate = _polar_columns(np.asarray(q, dtype=float), eps)
    return Frame(basis, "polar", query_index, None, degenerate)


def pcrf_transform(frame: Frame, p) -> np.ndarray:
    return frame.transform(p)


def crf_basis(
    q,
    n,
    eps: float = DEFAULT_EPS,
    *,
    fallback: bool = True,
    query_index: int | None = None,
) -> Frame:
    """Composed centrifugal frame ``B1 @ B2`` of query ``q`` with unit normal ``n``.

    ``B1`` is the polar frame of ``q``; ``B2`` is the polar frame of the normal
    written in ``B1`` coordinates. With ``fallback=False`` a normal along the
    first frame's w-axis raises NormalRadial instead of using the fallback.
    """
    q = np.asarray(q, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > NORMAL_TOL:
        raise ValueError(f"normal must have unit length, got norm {np.linalg.norm(n)!r}")
    b1, deg1 = _polar_columns(q, eps)
    n_local = b1.T @ n
    if not fallback and np.hypot(n_local[0], n_local[1]) <= eps:
        raise NormalRadial("normal is parallel to the query direction")
    b2, deg2 = _polar_columns(n_local, eps)
    return Frame(b1 @ b2, "composed", query_index, n, deg1 or deg2)


def crf_transform(frame: Frame, p) -> np.ndarray:
    if frame.kind != "composed":
        raise ValueError("crf_transform needs a composed frame (use crf_basis)")
    return frame.transform(p)


def orient_normals(points: np.ndarray, normals: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Flip normals to point away from the origin.

    Where ``|n . p| <= eps`` the radial rule is undecided and the first
    component with magnitude above ``eps`` is made positive instead.
    """
    normals = np.array(normals, dtype=float)
    radial = np.einsum("ij,ij->i", normals, points)
    sign = np.sign(radial)
    tie = np.abs(radial) <= eps
    if np.any(tie):
        sub = normals[tie]
        first = np.argmax(np.abs(sub) > eps, axis=1)
        sign[tie] = np.sign(sub[np.arange(len(sub)), first])
    sign[sign == 0] = 1.0
    return normals * sign[:, None]


def estimate_normals(cloud: PointCloud, k: int = 16, eps: float = DEFAULT_EPS) -> PointCloud:
    """Fill normals from the covariance of each point's k nearest neighbors.

    The normal is the eigenvector of the smallest covariance eigenvalue.
    Raises DegenerateNeighborhood if the two smallest eigenvalues agree within
    ``eps``; a larger ``k`` may help.
    """
    pts = cloud.points
    n = len(pts)
    if k < 3:
        raise ValueError(f"k must be at least 3, got {k}")
    if n < k:
        raise ValueError(f"cloud has {n} points, fewer than k={k}")
    groups = pts[knn_array(pts, np.arange(n), k)]  # (n, k, 3)
    centered = groups - groups.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    bad = np.flatnonzero(evals[:, 1] - evals[:, 0] <= eps)
    if bad.size:
        raise DegenerateNeighborhood(
            f"{bad.size} point(s) have an ambiguous normal (first: index {bad[0]}); try a larger k"
        )
    normals = evecs[:, :, 0]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(pts, orient_normals(pts, normals, eps))


def factor_rotation(r, q, eps: float = DEFAULT_EPS) -> float:
    """Angle ``theta`` with ``R = B' Rz(theta) B^T``.

    ``B`` is the polar frame of ``q`` and ``B'`` that of ``R q``. Since both
    frames have ``q``'s direction as third axis, ``B'^T R B`` fixes the z-axis
    and is a pure z-rotation.
    """
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    b, _ = _polar_columns(q, eps)
    b_rot, _ = _polar_columns(r @ q, eps)
    m = b_rot.T @ r @ b
    return float(np.arctan2(m[1, 0], m[0, 0]))


def factor_residual(r, q, eps: float = DEFAULT_EPS) -> float:
    """``max |R - B' Rz(theta) B^T|`` for the factorization above."""
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    b, _ = _polar_columns(q, eps)
    b_rot, _ = _polar_columns(r @ q, eps)
    theta = factor_rotation(r, q, eps)
    return float(np.abs(r - b_rot @ rotation_about_z(theta) @ b.T).max())


def subgroup_map(x, q, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Map a rotation ``X`` onto the z-rotation subgroup through polar frames.

    Returns ``B(Xq)^T X B(q)``, always of the form ``Rz(.)``. For any ``R`` it
    satisfies ``subgroup_map(R X) = Rz(factor_rotation(R, X q)) subgroup_map(X)``.
    """
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    b, _ = _polar_columns(q, eps)
    b_img, _ = _polar_columns(x @ q, eps)
    return b_img.T @ x @ b
