"""Continuous point (and hence rotation) distribution built on a cloud.

Each point carries an isotropic Gaussian whose spread is the cloud's mean
nearest-neighbor distance. A sample is drawn in two steps: perturb every
point with its own Gaussian, then take the weighted sum of the perturbed
points. Attaching a composed frame to the sample turns it into a rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .cloud import PointCloud, as_points
from .errors import TooFewPoints
from .frames import DEFAULT_EPS, Frame, crf_basis
from .geom import as_rng

__all__ = [
    "MixtureDistribution",
    "mean_nearest_neighbor_distance",
    "build_mixture",
    "uniform_weights",
    "dirichlet_weights",
    "canonical_frame",
    "sample_point",
    "sample_rotation",
]


@dataclass(frozen=True, eq=False)
class MixtureDistribution:
    centers: np.ndarray
    sigma: float
    weights: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        if len(self.weights) != len(self.centers):
            raise ValueError("weights and centers differ in length")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def __len__(self) -> int:
        return len(self.centers)


def mean_nearest_neighbor_distance(points) -> float:
    pts = as_points(points)
    if len(pts) < 2:
        raise TooFewPoints("nearest-neighbor distance needs at least two points")
    nearest = np.empty(len(pts))
    for lo in range(0, len(pts), 1024):
        d = cdist(pts[lo : lo + 1024], pts)
        d[np.arange(len(d)), np.arange(lo, lo + len(d))] = np.inf
        nearest[lo : lo + len(d)] = d.min(axis=1)
    return float(nearest.mean())


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def dirichlet_weights(n: int, alpha: float = 0.1, rng=None) -> np.ndarray:
    """Symmetric Dirichlet draw; small ``alpha`` concentrates mass on few points."""
    return as_rng(rng).dirichlet(np.full(n, float(alpha)))


def build_mixture(cloud, weights=None) -> MixtureDistribution:
    pts = as_points(cloud)
    sigma = mean_nearest_neighbor_distance(pts)
    w = uniform_weights(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    return MixtureDistribution(np.array(pts), sigma, w)


def canonical_frame(points, eps: float = DEFAULT_EPS) -> np.ndarray:
    """A frame that rotates with the cloud: ``F(R P) = R F(P)``.

    Composed frame of the farthest point from the origin, using the direction
    of the second-farthest point in place of a normal. Generic clouds (unique
    norms, the two points not collinear with the origin) are required.
    """
    pts = as_points(points)
    order = np.argsort(-np.linalg.norm(pts, axis=1), kind="stable")
    if len(pts) < 2:
        raise TooFewPoints("canonical frame needs at least two points")
    second = pts[order[1]]
    # NormalRadial here means the cloud is symmetric about a line through the origin
    return crf_basis(pts[order[0]], second / np.linalg.norm(second), eps, fallback=False).basis


def sample_point(dist: MixtureDistribution, weights=None, rng=None, *, covariant: bool = False) -> np.ndarray:
    """Draw ``sum_i w_i (p_i + sigma xi_i)`` with ``xi_i`` standard normal.

    With ``covariant=True`` the offsets are expressed in ``canonical_frame``
    of the centers, so rotating the cloud rotates the sample for the same seed.
    The two modes have the same distribution. Covariant mode raises
    NormalRadial when the centers lie on a line through the origin.
    """
    w = dist.weights if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(dist),):
        raise ValueError(f"expected {len(dist)} weights, got shape {w.shape}")
    xi = as_rng(rng).standard_normal((len(dist), 3))
    if covariant:
        xi = xi @ canonical_frame(dist.centers).T
    return w @ (dist.centers + dist.sigma * xi)


def sample_rotation(
    dist: MixtureDistribution,
    cloud: PointCloud,
    weights=None,
    rng=None,
    eps: float = DEFAULT_EPS,
    *,
    covariant: bool = False,
) -> Frame:
    """Composed frame at a sampled point, borrowing the nearest input point's normal."""
    if cloud.normals is None:
        raise ValueError("sample_rotation needs a cloud with normals")
    p = sample_point(dist, weights, rng, covariant=covariant)
    nearest = int(np.argmin(np.linalg.norm(cloud.points - p, axis=1)))
    return crf_basis(p, cloud.normals[nearest], eps, query_index=nearest)
