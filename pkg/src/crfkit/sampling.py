"""Rotation-equivariant down-sampling and grouping.

Everything here depends on the cloud only through pairwise distances (or
through features the caller supplies), so rotating the input either leaves the
result unchanged (indices, distances) or rotates it along (sampled points).
All ties resolve to the lowest index.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .cloud import PointCloud, as_points
from .errors import DimensionMismatch

__all__ = [
    "pairwise_distances",
    "fps",
    "knn",
    "chamfer",
    "row_softmax",
    "attention_logits",
    "attention_sample",
    "relation_module",
    "anchor_from_relation",
]

# Rows of the distance matrix evaluated at once in knn; keeps memory bounded for N ~ 4096.
_KNN_CHUNK = 512


def pairwise_distances(cloud) -> np.ndarray:
    """``D[i, j] = ||p_i - p_j||``, computed from coordinate differences.

    The result is exactly symmetric with an exactly zero diagonal.
    """
    pts = as_points(cloud)
    return cdist(pts, pts)


def fps(cloud, m: int, start="max_norm") -> list[int]:
    """Greedy farthest-point sampling.

    ``start`` is ``"max_norm"`` (the point farthest from the origin) or an
    integer index. Each later pick maximizes the distance to the selected set.
    """
    pts = as_points(cloud)
    n = len(pts)
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    if start == "max_norm":
        first = int(np.argmax(np.linalg.norm(pts, axis=1)))
    else:
        first = int(start)
        if not 0 <= first < n:
            raise IndexError(f"start index {first} out of range for {n} points")
    selected = [first]
    min_dist = np.linalg.norm(pts - pts[first], axis=1)
    for _ in range(m - 1):
        nxt = int(np.argmax(min_dist))
        selected.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return selected


def knn(cloud, center_indices, k: int) -> list[list[int]]:
    """The ``k`` nearest points to each center (center included), nearest first."""
    pts = as_points(cloud)
    n = len(pts)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    centers = np.asarray(center_indices, dtype=int).reshape(-1)
    return knn_array(pts, centers, k).tolist()


def knn_array(pts: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((len(centers), k), dtype=int)
    for lo in range(0, len(centers), _KNN_CHUNK):
        chunk = centers[lo : lo + _KNN_CHUNK]
        d = cdist(pts[chunk], pts)
        # the center's own distance is exactly 0 but another coincident point could tie
        d[np.arange(len(chunk)), chunk] = -1.0
        out[lo : lo + len(chunk)] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def chamfer(a, b) -> float:
    """Symmetric Chamfer distance with squared distances and mean reduction."""
    pa, pb = as_points(a), as_points(b)
    d2 = cdist(pa, pb, "sqeuclidean")
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


def row_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def attention_logits(cloud, linear_map) -> np.ndarray:
    """``map @ D``: an ``(m, n)`` logit matrix from the cloud's distance matrix."""
    pts = as_points(cloud)
    m = np.asarray(linear_map, dtype=float)
    if m.ndim != 2 or m.shape[1] != len(pts):
        raise DimensionMismatch(f"map must have {len(pts)} columns, got shape {m.shape}")
    return m @ pairwise_distances(pts)


def attention_sample(cloud, linear_map=None, *, logits=None) -> PointCloud:
    """Soft down-sampling: ``row_softmax(map @ D) @ P``.

    Pass ``logits`` (shape ``(m, n)``) instead of ``linear_map`` to bypass the
    distance matrix. Each output point is a convex combination of inputs.
    """
    pts = as_points(cloud)
    if (linear_map is None) == (logits is None):
        raise ValueError("pass exactly one of linear_map or logits")
    if logits is None:
        logits = attention_logits(pts, linear_map)
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2 or logits.shape[1] != len(pts):
        raise DimensionMismatch(f"logits must have {len(pts)} columns, got shape {logits.shape}")
    return PointCloud(row_softmax(logits) @ pts)


def relation_module(features, phi_a, phi_b, psi):
    """Residual attention over points.

    Returns ``(F_hat, W)`` with ``W = row_softmax((F phi_a)(F phi_b)^T)`` and
    ``F_hat = W (F psi) + F``. Maps act on the right (``(c, d)`` and ``(c, c)``).
    """
    f = np.asarray(features, dtype=float)
    phi_a, phi_b, psi = (np.asarray(x, dtype=float) for x in (phi_a, phi_b, psi))
    if f.ndim != 2:
        raise DimensionMismatch(f"features must be 2D, got shape {f.shape}")
    c = f.shape[1]
    if phi_a.ndim != 2 or phi_b.ndim != 2 or phi_a.shape[0] != c or phi_b.shape[0] != c:
        raise DimensionMismatch(f"phi maps must have {c} rows")
    if phi_a.shape[1] != phi_b.shape[1]:
        raise DimensionMismatch("phi maps must share the embedding width")
    if psi.shape != (c, c):
        raise DimensionMismatch(f"psi must be ({c}, {c}), got {psi.shape}")
    w = row_softmax((f @ phi_a) @ (f @ phi_b).T)
    return w @ (f @ psi) + f, w


def anchor_from_relation(w, axis: int = 0) -> int:
    """Index of the most representative point under the affinity matrix ``w``.

    ``axis=0`` averages over the first index (column means); ``axis=1`` uses
    row means instead.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch(f"W must be square, got shape {w.shape}")
    return int(np.argmax(w.mean(axis=axis)))
