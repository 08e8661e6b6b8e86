"""Small synthetic shapes shipped with the package.

``tetra_handle.off``  asymmetric tetrahedron with a slanted prism handle
``sphere.off``        icosphere (two subdivisions, 320 faces)
``plane.off``         flat square patch split into triangles
``collinear.xyz``     irregularly spaced points on one line (degenerate)

The files are generated by :func:`write_all` and loaded with :func:`load`.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..cloud import PointCloud
from ..frames import orient_normals
from ..io import TriangleMesh, normalize_unit_sphere, read_cloud, sample_mesh_surface, write_xyz

NAMES = ("tetra_handle", "sphere", "plane", "collinear")
_FILES = {
    "tetra_handle": "tetra_handle.off",
    "sphere": "sphere.off",
    "plane": "plane.off",
    "collinear": "collinear.xyz",
}


def path(name: str):
    if name not in _FILES:
        raise KeyError(f"unknown fixture {name!r}; choose from {NAMES}")
    return resources.files(__name__) / _FILES[name]


def load(name: str):
    """TriangleMesh for the mesh fixtures, PointCloud for ``collinear``."""
    with resources.as_file(path(name)) as p:
        return read_cloud(p)


def tetra_handle_mesh() -> TriangleMesh:
    verts = [
        (0.0, 0.0, 0.0),
        (1.3, 0.0, 0.0),
        (0.35, 1.05, 0.0),
        (0.45, 0.4, 0.95),
        # handle root on the bottom face, and its far end
        (0.45, 0.25, 0.0),
        (0.65, 0.25, 0.0),
        (0.55, 0.4, 0.0),
        (0.75, 0.35, -0.8),
        (0.95, 0.35, -0.8),
        (0.85, 0.5, -0.8),
    ]
    faces = [
        (0, 2, 1),
        (0, 1, 3),
        (1, 2, 3),
        (2, 0, 3),
        (7, 8, 9),
        (4, 5, 8),
        (4, 8, 7),
        (5, 6, 9),
        (5, 9, 8),
        (6, 4, 7),
        (6, 7, 9),
    ]
    return TriangleMesh(np.array(verts), np.array(faces))


def icosphere(subdivisions: int = 2) -> TriangleMesh:
    t = (1.0 + 5**0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]  # fmt: skip
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]  # fmt: skip
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts), np.array(faces))


def plane_mesh(size: float = 1.0, cells: int = 4) -> TriangleMesh:
    ticks = np.linspace(-size, size, cells + 1)
    verts = np.array([(x, y, 0.0) for y in ticks for x in ticks])
    faces = []
    row = cells + 1
    for j in range(cells):
        for i in range(cells):
            a = j * row + i
            faces += [(a, a + 1, a + row + 1), (a, a + row + 1, a + row)]
    return TriangleMesh(verts, np.array(faces))


def collinear_cloud(n: int = 64, seed: int = 7) -> PointCloud:
    rng = np.random.default_rng(seed)
    direction = np.array([2.0, -1.0, 0.5])
    t = np.sort(rng.uniform(-1.0, 1.0, n))
    return PointCloud(np.outer(t, direction / np.linalg.norm(direction)))


def sampled_cloud(name: str, n: int = 1024, seed: int = 0) -> PointCloud:
    """Fixture as a unit-sphere-normalized cloud (surface-sampled meshes keep face normals)."""
    data = load(name)
    if isinstance(data, PointCloud):
        return normalize_unit_sphere(data)
    cloud = normalize_unit_sphere(sample_mesh_surface(data, n, seed))
    return cloud.with_normals(orient_normals(cloud.points, cloud.normals))


def asymmetric_cloud(n: int = 1024, seed: int = 0) -> PointCloud:
    return sampled_cloud("tetra_handle", n, seed)


def _write_off(target, mesh: TriangleMesh) -> None:
    with open(target, "w") as fh:
        fh.write(f"OFF\n{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")
        for f in mesh.faces:
            fh.write("3 " + " ".join(str(int(i)) for i in f) + "\n")


def write_all(directory) -> None:
    """Regenerate the shipped fixture files into ``directory``."""
    from pathlib import Path

    d = Path(directory)
    _write_off(d / "tetra_handle.off", tetra_handle_mesh())
    _write_off(d / "sphere.off", icosphere(2))
    _write_off(d / "plane.off", plane_mesh())
    write_xyz(d / "collinear.xyz", collinear_cloud())
