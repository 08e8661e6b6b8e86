from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMAL_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points with optional unit normals (one row per point).

    Arrays are copied and made read-only on construction.
    """

    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim == 1 and pts.size == 3:
            pts = _frozen(pts.reshape(1, 3))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if len(pts) < 1:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = _frozen(self.normals)
            if nrm.shape != pts.shape:
                raise ValueError(f"normals shape {nrm.shape} does not match points {pts.shape}")
            if np.abs(np.linalg.norm(nrm, axis=1) - 1.0).max() > NORMAL_TOL:
                raise ValueError("normals must have unit length")
            object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    def with_normals(self, normals) -> PointCloud:
        return PointCloud(self.points, normals)

    def without_normals(self) -> PointCloud:
        return PointCloud(self.points)

    def rotated(self, r: np.ndarray) -> PointCloud:
        """Rotate points and normals by ``r``."""
        normals = None if self.normals is None else self.normals @ r.T
        return PointCloud(self.points @ r.T, normals)

    def subset(self, indices) -> PointCloud:
        idx = np.asarray(indices, dtype=int)
        normals = None if self.normals is None else self.normals[idx]
        return PointCloud(self.points[idx], normals)


def as_points(cloud) -> np.ndarray:
    """Coordinates of a PointCloud, or an array-like coerced to ``(N, 3)``."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
    return pts
