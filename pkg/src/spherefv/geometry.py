"""Geometry primitives on the unit sphere.

Every function accepts either a single point of shape ``(3,)`` or a stack of
points of shape ``(..., 3)`` and broadcasts over the leading axes. Points are
plain ``float64`` arrays; :class:`UnitVector` and :class:`GeoCoord` exist for
callers that want a validated scalar value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-14


class GeometryError(ValueError):
    """Raised for geometrically undefined requests (antipodes, collinear points)."""


@dataclass(frozen=True)
class UnitVector:
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        norm2 = self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3
        if abs(norm2 - 1.0) > UNIT_TOL * 4:
            raise GeometryError(f"not a unit vector: |x|^2 = {norm2!r}")

    @classmethod
    def from_array(cls, p) -> "UnitVector":
        p = np.asarray(p, dtype=float)
        return cls(float(p[0]), float(p[1]), float(p[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    def to_geo(self) -> "GeoCoord":
        lat, lon = to_latlon(self.to_array())
        return GeoCoord(float(lat), float(lon))


@dataclass(frozen=True)
class GeoCoord:
    """Latitude/longitude in radians."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -np.pi / 2 <= self.lat <= np.pi / 2:
            raise GeometryError(f"latitude out of range: {self.lat}")
        if not -np.pi <= self.lon <= np.pi:
            raise GeometryError(f"longitude out of range: {self.lon}")

    def to_unit(self) -> UnitVector:
        return UnitVector.from_array(from_latlon(self.lat, self.lon))


def to_latlon(p):
    """Return ``(lat, lon)`` arrays for points on the sphere."""
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    lat = np.arctan2(z, np.hypot(x, y))
    lon = np.arctan2(y, x)
    return lat, lon


def from_latlon(lat, lon) -> np.ndarray:
    lat, lon = np.broadcast_arrays(np.asarray(lat, dtype=float), np.asarray(lon, dtype=float))
    c = np.cos(lat)
    return np.stack([c * np.cos(lon), c * np.sin(lon), np.sin(lat)], axis=-1)


def _norm(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def geodesic_distance(a, b):
    """Great-circle distance in radians.

    Uses ``atan2(|a x b|, a . b)``, which keeps full relative precision near
    0 and pi where ``arccos`` of the dot product does not.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.arctan2(_norm(np.cross(a, b)), _dot(a, b))


def chord_length(a, b):
    return _norm(np.asarray(b, dtype=float) - np.asarray(a, dtype=float))


def spherical_triangle_area(a, b, c):
    """Spherical excess of the geodesic triangle ``abc`` in steradians.

    Evaluated with the Oosterom-Strackee identity
    ``tan(E/2) = |a.(b x c)| / (1 + a.b + b.c + c.a)``, which is stable for
    small triangles. Degenerate triangles give 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    triple = np.abs(_dot(a, np.cross(b, c)))
    denom = 1.0 + _dot(a, b) + _dot(b, c) + _dot(c, a)
    # three points on one great circle: atan2(0, negative) would report a hemisphere
    degenerate = (triple <= 1e-14) & (denom <= 0.0)
    return np.where(degenerate, 0.0, 2.0 * np.arctan2(triple, denom))


def circumcenter(a, b, c):
    """Spherical circumcenter of triangle ``abc``.

    The result is ``normalize((b - a) x (c - a))`` flipped onto the hemisphere
    of ``a + b + c``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    n = np.cross(b - a, c - a)
    nn = _norm(n)
    scale = np.maximum(np.maximum(_norm(b - a), _norm(c - a)), _norm(c - b))
    # coincident points, or all three on one great circle (plane through the origin)
    if np.any(nn <= 1e-15 * np.maximum(scale * scale, 1e-300)) or np.any(np.abs(_dot(n, a)) <= 1e-12 * nn):
        raise GeometryError("collinear vertices")
    sign = np.where(_dot(n, a + b + c) < 0.0, -1.0, 1.0)
    return (sign / nn)[..., None] * n


def arc_midpoint(a, b):
    """Midpoint of the minor great-circle arc from ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    ns = _norm(s)
    if np.any(ns < 1e-12):
        raise GeometryError("midpoint undefined for antipodal points")
    return s / ns[..., None]


def radial_project(p):
    """Project ``p`` onto the unit sphere along the ray from the origin."""
    p = np.asarray(p, dtype=float)
    n = _norm(p)
    if np.any(n == 0.0):
        raise GeometryError("cannot project the zero vector")
    return p / n[..., None]


def polygon_moment(poly):
    """First moment ``int y ds`` of a counterclockwise spherical polygon.

    ``poly`` has shape ``(k, 3)``. Closed form obtained from the divergence
    theorem on the cone over the polygon: half the sum over edges of the arc
    angle times the unit normal of the edge plane.
    """
    p = np.asarray(poly, dtype=float)
    q = np.roll(p, -1, axis=0)
    cr = np.cross(p, q)
    s = _norm(cr)
    theta = np.arctan2(s, _dot(p, q))
    w = np.where(s > 0.0, theta / np.where(s > 0.0, s, 1.0), 0.0)
    return 0.5 * (w[:, None] * cr).sum(axis=0)


def rotation_matrix(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)
