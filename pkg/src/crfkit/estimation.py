"""Rotation estimation between two clouds, the AD metric and an ICP baseline.

The anchor estimate relies on the composed frame being equivariant: if the
same physical point is picked as anchor in source and target, then
``B_t B_s^T`` is exactly the rotation taking the source onto the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .cloud import PointCloud, as_points
from .errors import DegenerateConfiguration, LengthMismatch
from .frames import DEFAULT_EPS, crf_basis, estimate_normals
from .geom import is_rotation, rotation_angle
from .sampling import anchor_from_relation, relation_module

__all__ = [
    "GEOMETRIC",
    "RELATIONAL",
    "ICP",
    "METHODS",
    "EstimationReport",
    "select_anchor_geometric",
    "select_anchor_relational",
    "radial_features",
    "default_relation_maps",
    "estimate_rotation",
    "align",
    "average_distance",
    "trial_distance",
    "diameter",
    "pose_accuracy",
    "kabsch_rotation",
    "icp_rotation",
]

GEOMETRIC = "crf_anchor_geometric"
RELATIONAL = "crf_anchor_relational"
ICP = "icp"
METHODS = (GEOMETRIC, RELATIONAL, ICP)


@dataclass(frozen=True, eq=False)
class EstimationReport:
    predicted_rotation: np.ndarray
    anchor_source: int | None
    anchor_target: int | None
    ad: float
    correct: bool
    method: str
    iterations: int | None = None

    def __post_init__(self):
        if not is_rotation(self.predicted_rotation, 1e-9):
            raise ValueError("predicted rotation is not in SO(3)")
        if not self.ad >= 0:
            raise ValueError(f"ad must be non-negative, got {self.ad!r}")


def select_anchor_geometric(cloud) -> int:
    """Point farthest from the origin (lowest index on ties)."""
    return int(np.argmax(np.linalg.norm(as_points(cloud), axis=1)))


def select_anchor_relational(features, phi_a, phi_b, psi, axis: int = 0) -> int:
    _, w = relation_module(features, phi_a, phi_b, psi)
    return anchor_from_relation(w, axis)


def radial_features(cloud, k: int = 8) -> np.ndarray:
    """Per-point rotation-invariant features: norm, squared norm, mean k-NN spacing."""
    pts = as_points(cloud)
    k = min(k, len(pts) - 1)
    r = np.linalg.norm(pts, axis=1)
    if k < 1:
        spacing = np.zeros(len(pts))
    else:
        d = np.sort(cdist(pts, pts), axis=1)[:, 1 : k + 1]
        spacing = d.mean(axis=1)
    return np.column_stack([r, r * r, spacing])


def default_relation_maps(channels: int, width: int = 4, seed: int = 0):
    """Fixed random stand-ins for the three learned maps (phi_a, phi_b, psi)."""
    rng = np.random.default_rng(seed)
    return (
        rng.standard_normal((channels, width)),
        rng.standard_normal((channels, width)),
        rng.standard_normal((channels, channels)),
    )


def diameter(cloud) -> float:
    """Largest pairwise distance."""
    pts = as_points(cloud)
    best = 0.0
    for lo in range(0, len(pts), 1024):
        best = max(best, float(cdist(pts[lo : lo + 1024], pts).max()))
    return best


def trial_distance(target, rotated, predicted: np.ndarray) -> float:
    """Mean ``||t_i - R s_i||`` over index-corresponded points of one trial."""
    t, s = as_points(target), as_points(rotated)
    if t.shape != s.shape:
        raise LengthMismatch(f"clouds differ in size: {len(t)} vs {len(s)}")
    return float(np.linalg.norm(t - s @ np.asarray(predicted).T, axis=1).mean())


def average_distance(target, rotated, predicted) -> float:
    """AD over K trials: ``(1/KN) sum_k sum_i ||p_i - R_k p_ki||``."""
    if len(rotated) != len(predicted):
        raise LengthMismatch(f"{len(rotated)} rotated clouds but {len(predicted)} predictions")
    if len(rotated) == 0:
        raise LengthMismatch("need at least one trial")
    return float(np.mean([trial_distance(target, s, r) for s, r in zip(rotated, predicted)]))


def pose_accuracy(ad_values, diameter: float) -> float:
    """Fraction of trials whose AD is below 10% of the object diameter."""
    if not diameter > 0:
        raise ValueError(f"diameter must be positive, got {diameter!r}")
    ad = np.asarray(ad_values, dtype=float)
    if ad.size == 0:
        raise ValueError("no AD values")
    return float(np.mean(ad < 0.1 * diameter))


def align(source: PointCloud, r: np.ndarray) -> PointCloud:
    return source.rotated(np.asarray(r, dtype=float))


def _report_distance(target: PointCloud, source: PointCloud, r: np.ndarray) -> float:
    if len(target) == len(source):
        return trial_distance(target, source, r)
    # no index correspondence: fall back to the closest-point distance
    moved = source.points @ r.T
    return float(cKDTree(moved).query(target.points)[0].mean())


def _report(target, source, r, anchors, method, iterations=None) -> EstimationReport:
    ad = _report_distance(target, source, r)
    correct = ad < 0.1 * diameter(target) if len(target) > 1 else ad == 0.0
    return EstimationReport(r, anchors[0], anchors[1], ad, bool(correct), method, iterations)


def _with_normals(cloud: PointCloud, k: int, eps: float) -> PointCloud:
    return cloud if cloud.normals is not None else estimate_normals(cloud, k, eps)


def estimate_rotation(
    source: PointCloud,
    target: PointCloud,
    method: str = GEOMETRIC,
    *,
    k: int = 16,
    eps: float = DEFAULT_EPS,
    features=None,
    maps=None,
    anchor_axis: int = 0,
    max_iter: int = 2000,
    tol: float = 1e-7,
) -> EstimationReport:
    """Rotation taking ``source`` onto ``target``.

    For the anchor methods the estimate is ``B_t B_s^T`` with ``B`` the
    composed frame at each cloud's anchor. The relational method picks anchors
    with the relation module; ``features`` is a ``(F_source, F_target)`` pair
    (default: :func:`radial_features`) and ``maps`` a ``(phi_a, phi_b, psi)``
    triple (default: :func:`default_relation_maps`). Missing normals are
    estimated with ``k`` neighbors.
    """
    if method == ICP:
        return icp_rotation(source, target, max_iter, tol)
    if method not in (GEOMETRIC, RELATIONAL):
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    source = _with_normals(source, k, eps)
    target = _with_normals(target, k, eps)
    if method == GEOMETRIC:
        a_s, a_t = select_anchor_geometric(source), select_anchor_geometric(target)
    else:
        f_s, f_t = features if features is not None else (radial_features(source), radial_features(target))
        f_s, f_t = np.asarray(f_s, dtype=float), np.asarray(f_t, dtype=float)
        phi_a, phi_b, psi = maps if maps is not None else default_relation_maps(f_s.shape[1])
        a_s = select_anchor_relational(f_s, phi_a, phi_b, psi, anchor_axis)
        a_t = select_anchor_relational(f_t, phi_a, phi_b, psi, anchor_axis)
    b_s = crf_basis(source.points[a_s], source.normals[a_s], eps, query_index=a_s)
    b_t = crf_basis(target.points[a_t], target.normals[a_t], eps, query_index=a_t)
    return _report(target, source, b_t.basis @ b_s.basis.T, (a_s, a_t), method)


def kabsch_rotation(p, q, rank_tol: float = 1e-10) -> np.ndarray:
    """Rotation ``R`` minimizing ``sum ||q_i - R p_i||^2`` (no translation).

    Raises DegenerateConfiguration when the cross-covariance has rank < 2.
    """
    p, q = as_points(p), as_points(q)
    if p.shape != q.shape:
        raise LengthMismatch(f"point sets differ in size: {len(p)} vs {len(q)}")
    if len(p) < 3:
        raise DegenerateConfiguration("need at least 3 correspondences")
    h = p.T @ q
    u, s, vt = np.linalg.svd(h)
    if s[0] == 0 or s[1] <= rank_tol * s[0]:
        raise DegenerateConfiguration("cross-covariance has rank < 2; rotation not identifiable")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


def icp_rotation(source: PointCloud, target: PointCloud, max_iter: int = 2000, tol: float = 1e-7) -> EstimationReport:
    """Rotation-only point-to-point ICP.

    Each iteration matches every rotated source point to its nearest target
    point and composes the Kabsch update; stops once the update angle drops
    below ``tol`` radians.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    src, tgt = as_points(source), as_points(target)
    tree = cKDTree(tgt)
    r = np.eye(3)
    it = 0
    for it in range(1, max_iter + 1):
        moved = src @ r.T
        _, idx = tree.query(moved)
        step = kabsch_rotation(moved, tgt[idx])
        r = step @ r
        if rotation_angle(step) < tol:
            break
    # re-orthonormalize accumulated products
    u, _, vt = np.linalg.svd(r)
    r = u @ np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vt))]) @ vt
    return _report(target, source, r, (None, None), ICP, it)
