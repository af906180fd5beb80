"""Barycentric transport between a mesh and its sphere image, plus sampling.

A :class:`SurfaceLocation` (triangle index + barycentric coordinates) is the
coordinate-free "point on a mesh". Because the conformal map keeps triangle
indices, mapping a location between the source mesh and its sphere image is
the identity on (triangle, bary); only the mesh against which the location
is evaluated changes, which makes the map bijective by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import LocationError
from .mesh import TriangleMesh

FloatArray = NDArray[np.float64]

# Slack tolerated (and clamped away) on barycentric coordinates.
BARY_SLACK = 1e-10

# Containment slack for the gnomonic point-in-triangle test.
GNOMONIC_EPS = 1e-12

M_TO_SPHERE = "m_to_sphere"
SPHERE_TO_M = "sphere_to_m"


@dataclass(frozen=True)
class SurfaceLocation:
    """Point on a mesh: triangle index plus barycentric (s, t).

    The corner weights are (1 - s - t, s, t); s, t >= 0 and s + t <= 1,
    clamped on construction within a 1e-10 slack.
    """

    triangle: int
    s: float
    t: float

    def __post_init__(self) -> None:
        s, t = float(self.s), float(self.t)
        if s < -BARY_SLACK or t < -BARY_SLACK or s + t > 1.0 + BARY_SLACK:
            raise LocationError(f"barycentric coordinates outside simplex: s={s!r}, t={t!r}")
        s = min(max(s, 0.0), 1.0)
        t = min(max(t, 0.0), 1.0)
        if s + t > 1.0:
            # shave the excess off the larger coordinate
            excess = s + t - 1.0
            if s >= t:
                s -= excess
            else:
                t -= excess
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)

    @property
    def weights(self) -> FloatArray:
        return np.array([1.0 - self.s - self.t, self.s, self.t])


def position_of(mesh: TriangleMesh, loc: SurfaceLocation) -> FloatArray:
    """Embedded position p1 + s (p2 - p1) + t (p3 - p1) of a location."""
    if not 0 <= loc.triangle < mesh.face_count:
        raise LocationError(f"triangle index {loc.triangle} out of range")
    i, j, k = mesh.triangles[loc.triangle]
    v = mesh.vertices
    return v[i] + loc.s * (v[j] - v[i]) + loc.t * (v[k] - v[i])


def map_location(atlas, loc: SurfaceLocation, direction: str) -> SurfaceLocation:
    """Map a location between the source mesh and its sphere image.

    Triangle correspondence is by identical index, so the mapped location is
    the same (triangle, bary) pair; the direction only selects which mesh to
    evaluate it against. Applying the opposite direction is the exact inverse.
    """
    if direction not in (M_TO_SPHERE, SPHERE_TO_M):
        raise ValueError(f"unknown direction {direction!r}")
    if not 0 <= loc.triangle < atlas.source_mesh.face_count:
        raise LocationError(f"triangle index {loc.triangle} not in atlas correspondence")
    return loc


def mapped_position(atlas, loc: SurfaceLocation, direction: str) -> FloatArray:
    """Embedded position of `map_location(atlas, loc, direction)` on the target mesh."""
    loc = map_location(atlas, loc, direction)
    target = atlas.sphere_mesh if direction == M_TO_SPHERE else atlas.source_mesh
    return position_of(target, loc)


def interpolate_scalar(mesh: TriangleMesh, values, loc: SurfaceLocation) -> float:
    """Barycentric interpolation of per-vertex values at a location."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (mesh.vertex_count,):
        raise ValueError("need exactly one value per vertex")
    i, j, k = mesh.triangles[loc.triangle]
    w = loc.weights
    return float(w[0] * values[i] + w[1] * values[j] + w[2] * values[k])


class SphereLocator:
    """Point location on a sphere mesh via gnomonic containment tests.

    For a unit vector p, the containing triangle is the one whose radial
    (central) projection covers p: solve p = a*v1 + b*v2 + c*v3 and test
    a, b, c >= -eps. Queries walk across edges from a hint triangle and fall
    back to a vectorized sweep over all triangles after 2F visited.
    """

    def __init__(self, mesh: TriangleMesh) -> None:
        self.mesh = mesh
        v1, v2, v3 = mesh.corners()
        corners = np.stack([v1, v2, v3], axis=2)  # (F, 3, 3), columns = corners
        try:
            self._inv = np.linalg.inv(corners)
        except np.linalg.LinAlgError as exc:
            raise LocationError("sphere mesh has a triangle coplanar with the origin") from exc
        self._neighbors = self._build_neighbors(mesh)

    @staticmethod
    def _build_neighbors(mesh: TriangleMesh) -> NDArray[np.int64]:
        """neighbors[t, c] = triangle across the edge opposite corner c (-1 if none)."""
        owner: dict[tuple[int, int], tuple[int, int]] = {}
        neighbors = np.full((mesh.face_count, 3), -1, dtype=np.int64)
        tris = mesh.triangles
        for t in range(mesh.face_count):
            i, j, k = tris[t]
            for c, (a, b) in enumerate(((j, k), (k, i), (i, j))):
                key = (a, b) if a < b else (b, a)
                other = owner.get(key)
                if other is None:
                    owner[key] = (t, c)
                else:
                    ot, oc = other
                    neighbors[t, c] = ot
                    neighbors[ot, oc] = t
        return neighbors

    def _coeffs(self, t: int, p: FloatArray) -> FloatArray:
        return self._inv[t] @ p

    def locate(self, p, hint: int | None = None) -> SurfaceLocation:
        """Containing triangle and barycentric coordinates for unit vector p."""
        p = np.asarray(p, dtype=np.float64)
        mesh = self.mesh
        t = int(hint) if hint is not None and 0 <= hint < mesh.face_count else 0
        visited = 0
        cap = 2 * mesh.face_count
        while visited < cap:
            lam = self._coeffs(t, p)
            scale = max(1.0, float(np.abs(lam).max()))
            if lam.min() >= -GNOMONIC_EPS * scale:
                return self._to_location(t, lam)
            nxt = self._neighbors[t, int(np.argmin(lam))]
            if nxt < 0:
                break  # boundary edge: walk cannot proceed, fall back
            t = int(nxt)
            visited += 1
        return self._brute_force(p)

    def _brute_force(self, p: FloatArray) -> SurfaceLocation:
        lam = np.einsum("fij,j->fi", self._inv, p)
        scale = np.maximum(1.0, np.abs(lam).max(axis=1))
        inside = np.nonzero(lam.min(axis=1) >= -GNOMONIC_EPS * scale)[0]
        if inside.size == 0:
            raise LocationError("no triangle contains the query point (corrupt sphere mesh?)")
        t = int(inside[0])  # deterministic: lowest triangle index on ties
        return self._to_location(t, lam[t])

    @staticmethod
    def _to_location(t: int, lam: FloatArray) -> SurfaceLocation:
        b = np.clip(lam, 0.0, None)
        b /= b.sum()
        return SurfaceLocation(t, float(b[1]), float(b[2]))

    def locate_many(self, points, hints=None) -> list[SurfaceLocation]:
        points = np.asarray(points, dtype=np.float64)
        if hints is None:
            hints = [None] * points.shape[0]
        return [self.locate(p, hint=h) for p, h in zip(points, hints)]


def relocate_on_sphere_mesh(p, hint: int, sphere_mesh: TriangleMesh | SphereLocator) -> SurfaceLocation:
    """Locate unit vector `p` on a sphere mesh, walking from `hint`.

    Convenience wrapper; loops should construct one :class:`SphereLocator`
    and call :meth:`SphereLocator.locate` to reuse the precomputed tables.
    """
    locator = sphere_mesh if isinstance(sphere_mesh, SphereLocator) else SphereLocator(sphere_mesh)
    return locator.locate(p, hint=hint)


def sample_points(
    sphere_mesh: TriangleMesh,
    source_areas,
    count: int,
    seed: int,
) -> list[SurfaceLocation]:
    """Sample locations on the sphere mesh, weighted by source-mesh triangle areas.

    The triangle is drawn with probability proportional to the corresponding
    source triangle's area, so mapping the samples back to the source mesh
    reproduces its uniform area measure; within a triangle the barycentric
    coordinates are uniform over the simplex (square-root construction).
    Deterministic for a fixed seed.
    """
    source_areas = np.asarray(source_areas, dtype=np.float64)
    if source_areas.shape != (sphere_mesh.face_count,):
        raise ValueError("need one source area per triangle")
    if np.any(source_areas <= 0.0):
        raise ValueError("source areas must be positive")
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    tri = rng.choice(sphere_mesh.face_count, size=count, p=source_areas / source_areas.sum())
    r1 = rng.random(count)
    r2 = rng.random(count)
    sq = np.sqrt(r1)
    s = sq * (1.0 - r2)
    t = sq * r2
    return [SurfaceLocation(int(a), float(b), float(c)) for a, b, c in zip(tri, s, t)]
