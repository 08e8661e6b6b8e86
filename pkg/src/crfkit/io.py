"""Mesh and point-cloud files, surface sampling and unit-sphere normalization.

Formats:

* OFF: ``OFF`` header (counts may share its line, as in ModelNet), vertex
  lines, then polygon lines ``k i0 ... ik-1``. Polygons are fan-triangulated.
* ASCII PLY: ``vertex`` element with x/y/z (nx/ny/nz optional) and an optional
  ``face`` element with a vertex index list.
* XYZ: one point per line, 3 columns or 6 (point + normal).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import AllPointsCoincident, EmptyMesh, IndexOutOfRange, ParseError
from .frames import DEFAULT_EPS, orient_normals
from .geom import as_rng

__all__ = [
    "TriangleMesh",
    "read_off",
    "read_ply_ascii",
    "read_xyz",
    "write_xyz",
    "write_ply_ascii",
    "read_cloud",
    "write_cloud",
    "sample_mesh_surface",
    "normalize_unit_sphere",
]

# area below which a face counts as degenerate and is never sampled
_AREA_EPS = 1e-15


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f) == 0:
            raise EmptyMesh("mesh has no faces")
        if f.min() < 0 or f.max() >= len(v):
            bad = int(np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))[0])
            raise IndexOutOfRange(f"face {bad} references a vertex outside [0, {len(v)})")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValueError("every face needs three distinct vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.areas().sum() <= _AREA_EPS:
            raise EmptyMesh("mesh has zero surface area")

    def _edges(self):
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return a, b - a, c - a

    def areas(self) -> np.ndarray:
        _, e1, e2 = self._edges()
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals by vertex winding; zero rows for degenerate faces."""
        _, e1, e2 = self._edges()
        n = np.cross(e1, e2)
        length = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, length, out=np.zeros_like(n), where=length > 0)


# --- parsing helpers -------------------------------------------------------


def _content_lines(path):
    """Yield ``(lineno, tokens)`` for non-blank, non-comment lines."""
    with open(path, encoding="ascii", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def _floats(tokens, lineno, path, what="number"):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected {what}s, got {' '.join(tokens)!r}", lineno, path) from None


def _ints(tokens, lineno, path):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integers, got {' '.join(tokens)!r}", lineno, path) from None


def _fan(polygon):
    return [(polygon[0], polygon[i], polygon[i + 1]) for i in range(1, len(polygon) - 1)]


def read_off(path) -> TriangleMesh:
    path = os.fspath(path)
    lines = _content_lines(path)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file", None, path) from None
    head = tokens[0]
    if not head.startswith("OFF"):
        raise ParseError(f"missing OFF header, got {head!r}", lineno, path)
    # ModelNet writes e.g. "OFF490 518 0" with the counts glued to the header
    rest = ([head[3:]] if len(head) > 3 else []) + tokens[1:]
    if not rest:
        try:
            lineno, rest = next(lines)
        except StopIteration:
            raise ParseError("missing vertex/face counts", lineno, path) from None
    counts = _ints(rest, lineno, path)
    if len(counts) < 2:
        raise ParseError("expected vertex and face counts", lineno, path)
    n_vertices, n_faces = counts[0], counts[1]

    vertices = []
    faces = []
    for _ in range(n_vertices):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {n_vertices} vertices, file ended", lineno, path) from None
        xyz = _floats(tokens[:3], lineno, path, "coordinate")
        if len(xyz) != 3:
            raise ParseError("vertex needs 3 coordinates", lineno, path)
        vertices.append(xyz)
    for _ in range(n_faces):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {n_faces} faces, file ended", lineno, path) from None
        values = _ints(tokens, lineno, path) if tokens else []
        if not values or len(values) < values[0] + 1 or values[0] < 3:
            raise ParseError("face line must be 'k i0 ... ik-1' with k >= 3", lineno, path)
        polygon = values[1 : values[0] + 1]
        for idx in polygon:
            if not 0 <= idx < n_vertices:
                raise IndexOutOfRange(f"{path}:{lineno}: vertex index {idx} outside [0, {n_vertices})")
        if len(set(polygon)) < len(polygon):
            raise ParseError("face repeats a vertex", lineno, path)
        faces.extend(_fan(polygon))
    return TriangleMesh(np.array(vertices), np.array(faces))


def read_ply_ascii(path):
    """Read an ASCII PLY; returns a TriangleMesh if it has faces, else a PointCloud."""
    path = os.fspath(path)
    with open(path, encoding="ascii", errors="replace") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1, path)
    elements = []  # (name, count, [(prop_name, is_list)])
    lineno = 1
    body_start = None
    for lineno, line in enumerate(raw[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError(f"only ASCII PLY is supported, got {line.strip()!r}", lineno, path)
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", lineno, path)
            elements.append((tokens[1], _ints(tokens[2:], lineno, path)[0], []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("property before any element", lineno, path)
            is_list = len(tokens) >= 2 and tokens[1] == "list"
            elements[-1][2].append((tokens[-1], is_list))
        elif tokens[0] == "end_header":
            body_start = lineno
            break
        else:
            raise ParseError(f"unexpected header line {line.strip()!r}", lineno, path)
    if body_start is None:
        raise ParseError("missing end_header", lineno, path)

    body = [(i, line.split()) for i, line in enumerate(raw[body_start:], start=body_start + 1)]
    body = [(i, t) for i, t in body if t]
    pos = 0
    vertices = normals = None
    faces = []
    for name, count, props in elements:
        rows = body[pos : pos + count]
        if len(rows) < count:
            raise ParseError(f"expected {count} '{name}' rows, file ended", body[-1][0] if body else None, path)
        pos += count
        if name == "vertex":
            names = [p for p, _ in props]
            try:
                cols = [names.index(c) for c in ("x", "y", "z")]
            except ValueError:
                raise ParseError("vertex element lacks x/y/z", body_start, path) from None
            ncols = [names.index(c) for c in ("nx", "ny", "nz")] if {"nx", "ny", "nz"} <= set(names) else None
            data = np.array([_floats(t, i, path) for i, t in rows]) if rows else np.empty((0, len(names)))
            if data.ndim != 2 or data.shape[1] < len(names):
                raise ParseError("vertex row has too few values", rows[0][0] if rows else body_start, path)
            vertices = data[:, cols]
            if ncols is not None:
                normals = data[:, ncols]
        elif name == "face":
            for i, t in rows:
                values = _ints(t, i, path)
                if not values or values[0] < 3 or len(values) < values[0] + 1:
                    raise ParseError("face row must be 'k i0 ... ik-1' with k >= 3", i, path)
                polygon = values[1 : values[0] + 1]
                n_vert = 0 if vertices is None else len(vertices)
                for idx in polygon:
                    if not 0 <= idx < n_vert:
                        raise IndexOutOfRange(f"{path}:{i}: vertex index {idx} outside [0, {n_vert})")
                faces.extend(_fan(polygon))
    if vertices is None:
        raise ParseError("no vertex element", None, path)
    if faces:
        return TriangleMesh(vertices, np.array(faces))
    if normals is not None:
        length = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = normals / np.where(length > 0, length, 1.0)
    return PointCloud(vertices, normals)


def read_xyz(path) -> PointCloud:
    path = os.fspath(path)
    rows = []
    width = None
    for lineno, tokens in _content_lines(path):
        values = _floats(tokens, lineno, path)
        if len(values) not in (3, 6):
            raise ParseError(f"expected 3 or 6 columns, got {len(values)}", lineno, path)
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(f"expected {width} columns like the first row, got {len(values)}", lineno, path)
        rows.append(values)
    if not rows:
        raise ParseError("no points", None, path)
    data = np.array(rows)
    if width == 3:
        return PointCloud(data)
    normals = data[:, 3:]
    # 9 significant digits leave ~1e-9 of slack in |n|
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(data[:, :3], normals)


def write_xyz(path, cloud: PointCloud) -> None:
    data = cloud.points if cloud.normals is None else np.hstack([cloud.points, cloud.normals])
    np.savetxt(os.fspath(path), data, fmt="%.9g")


def write_ply_ascii(path, cloud: PointCloud) -> None:
    has_n = cloud.normals is not None
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    header += [f"property double {c}" for c in ("x", "y", "z")]
    if has_n:
        header += [f"property double {c}" for c in ("nx", "ny", "nz")]
    header.append("end_header")
    data = np.hstack([cloud.points, cloud.normals]) if has_n else cloud.points
    np.savetxt(os.fspath(path), data, fmt="%.9g", header="\n".join(header), comments="")


def read_cloud(path):
    """Dispatch on extension: .off / .ply / anything else as XYZ."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".off":
        return read_off(path)
    if ext == ".ply":
        return read_ply_ascii(path)
    return read_xyz(path)


def write_cloud(path, cloud: PointCloud) -> None:
    if os.fspath(path).lower().endswith(".ply"):
        write_ply_ascii(path, cloud)
    else:
        write_xyz(path, cloud)


def sample_mesh_surface(mesh: TriangleMesh, n: int, rng=None, eps: float = DEFAULT_EPS) -> PointCloud:
    """``n`` points spread uniformly over the surface, with face normals.

    Faces are chosen with probability proportional to area (zero-area faces
    never), points uniformly inside each face. Normals are oriented away from
    the origin, as in :func:`crfkit.frames.orient_normals`.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    areas = mesh.areas()
    areas = np.where(areas > _AREA_EPS, areas, 0.0)
    total = areas.sum()
    if total <= 0:
        raise EmptyMesh("mesh has zero surface area")
    rng = as_rng(rng)
    face = rng.choice(len(areas), size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.column_stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2])
    tri = mesh.vertices[mesh.faces[face]]  # (n, 3, 3)
    points = np.einsum("ni,nij->nj", bary, tri)
    normals = orient_normals(points, mesh.face_normals()[face], eps)
    return PointCloud(points, normals)


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center on the centroid and scale so the farthest point has norm 1."""
    centered = cloud.points - cloud.points.mean(axis=0)
    radius = np.linalg.norm(centered, axis=1).max()
    if radius == 0:
        raise AllPointsCoincident("all points coincide; cannot rescale")
    scaled = centered / radius
    # centering after the division keeps the centroid at rounding level of unit data
    scaled -= scaled.mean(axis=0)
    scaled /= np.linalg.norm(scaled, axis=1).max()
    return PointCloud(scaled, cloud.normals)
