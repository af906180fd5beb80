"""Procedural genus-zero test meshes: icospheres, ellipsoids, bumpy blobs."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh
from .numerics import normalize_rows


def icosahedron() -> TriangleMesh:
    """Regular icosahedron with vertices on the unit sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    t = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return TriangleMesh(normalize_rows(v), t)


def icosphere(subdivisions: int, radius: float = 1.0) -> TriangleMesh:
    """Icosahedron subdivided `subdivisions` times, re-projected to the sphere.

    Vertex count is 10 * 4**subdivisions + 2 (2562 at 4 levels).
    """
    mesh = icosahedron()
    verts = [tuple(p) for p in mesh.vertices]
    tris = mesh.triangles.tolist()
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            idx = midpoint.get(key)
            if idx is None:
                p = np.array(verts[i]) + np.array(verts[j])
                p /= np.linalg.norm(p)
                idx = len(verts)
                verts.append(tuple(p))
                midpoint[key] = idx
            return idx

        new_tris = []
        for i, j, k in tris:
            a, b, c = mid(i, j), mid(j, k), mid(k, i)
            new_tris += [[i, a, c], [j, b, a], [k, c, b], [a, b, c]]
        tris = new_tris
    vertices = normalize_rows(np.array(verts, dtype=np.float64))
    return TriangleMesh(radius * vertices, np.array(tris, dtype=np.int64))


def ellipsoid(a: float, b: float, c: float, subdivisions: int = 4) -> TriangleMesh:
    """Axis-aligned ellipsoid with semi-axes (a, b, c)."""
    base = icosphere(subdivisions)
    return TriangleMesh(base.vertices * np.array([a, b, c]), base.triangles)


def bumpy_sphere(subdivisions: int = 4, amplitude: float = 0.25) -> TriangleMesh:
    """Smooth non-convex blob: radial low-order polynomial bumps on a sphere.

    Deterministic, genus zero, with a clearly non-uniform conformal factor;
    stands in for organic scan-style test geometry.
    """
    base = icosphere(subdivisions)
    x, y, z = base.vertices.T
    bump = 1.6 * x * y * z + 0.6 * (x * x - y * y) * z + 0.3 * y
    r = 1.0 + amplitude * bump
    return TriangleMesh(base.vertices * r[:, None], base.triangles)
