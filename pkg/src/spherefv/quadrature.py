"""Quadrature on geodesic triangles through the radial projection.

A geodesic triangle is the radial image of the flat triangle spanned by its
vertices. Points ``x*`` of the flat triangle map to ``x*/|x*|`` on the sphere
with area Jacobian ``dist(0, plane) / |x*|**3``, so any planar rule lifts to
the sphere with exact geometry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def _degree5():
    # 7-point symmetric rule exact for polynomials of degree 5
    s15 = np.sqrt(15.0)
    a1 = (6.0 - s15) / 21.0
    a2 = (6.0 + s15) / 21.0
    w1 = (155.0 - s15) / 1200.0
    w2 = (155.0 + s15) / 1200.0
    b1 = 1.0 - 2.0 * a1
    b2 = 1.0 - 2.0 * a2
    nodes = np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [a1, a1, b1], [a1, b1, a1], [b1, a1, a1],
        [a2, a2, b2], [a2, b2, a2], [b2, a2, a2],
    ])
    weights = np.array([9.0 / 40.0, w1, w1, w1, w2, w2, w2])
    return nodes, weights


# Base rules on the reference triangle: barycentric nodes, weights summing to 1.
_BASE_RULES = {
    # edge midpoints, exact for quadratics
    "midpoint": (
        np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.full(3, 1.0 / 3.0),
    ),
    "centroid": (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    "degree5": _degree5(),
}


def _subdivide(depth: int) -> np.ndarray:
    """Barycentric vertices of the ``4**depth`` sub-triangles, shape (S, 3, 3)."""
    tris = np.eye(3)[None]
    for _ in range(depth):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        tris = np.stack([
            np.stack([a, ab, ca], 1),
            np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1),
            np.stack([ab, bc, ca], 1),
        ], 1).reshape(-1, 3, 3)
    return tris


@dataclass(frozen=True)
class QuadratureRule:
    """Composite rule: ``depth`` uniform subdivisions, then ``base`` on each piece."""

    depth: int = 2
    base: str = "degree5"

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.base not in _BASE_RULES:
            raise ValueError(f"unknown base rule {self.base!r}")

    @cached_property
    def barycentric(self) -> tuple[np.ndarray, np.ndarray]:
        """Merged nodes and weights on the reference triangle."""
        nodes, weights = _BASE_RULES[self.base]
        sub = _subdivide(self.depth)
        pts = np.einsum("kj,sjd->skd", nodes, sub).reshape(-1, 3)
        w = np.tile(weights, sub.shape[0]) / sub.shape[0]
        # shared nodes are merged so each distinct point is evaluated once
        key = np.round(pts * 4 ** (self.depth + 2)).astype(np.int64)
        _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
        merged = np.bincount(inv.ravel(), w)
        return pts[first], merged

    def nodes(self, a, b, c):
        """Sphere nodes and weights for geodesic triangles ``(a, b, c)``.

        ``a``, ``b``, ``c`` have shape (T, 3). Returns ``points`` (T, K, 3),
        ``weights`` (T, K) and the flat-triangle barycentric coordinates (K, 3).
        Weights are signed: a clockwise triangle integrates with a minus sign,
        so fans of a cell whose circumcenter crosses an edge still sum exactly.
        """
        lam, w = self.barycentric
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        c = np.asarray(c, dtype=float)
        n = np.cross(b - a, c - a)
        area2 = np.linalg.norm(n, axis=1)
        dist = np.einsum("ij,ij->i", n, a) / np.where(area2 > 0, area2, 1.0)
        flat = (lam[None, :, 0, None] * a[:, None, :]
                + lam[None, :, 1, None] * b[:, None, :]
                + lam[None, :, 2, None] * c[:, None, :])
        r = np.linalg.norm(flat, axis=2)
        jac = dist[:, None] / r**3
        weights = (0.5 * area2)[:, None] * w[None, :] * jac
        return flat / r[..., None], weights, lam

    def integrate_triangles(self, fn, a, b, c, chunk: int = 16384, with_area: bool = False):
        """Integral of ``fn`` over each geodesic triangle; ``fn`` maps (M, 3) -> (M,).

        With ``with_area=True`` also returns the rule's integral of 1 over each
        triangle.
        """
        a = np.asarray(a, dtype=float)
        out = np.empty(a.shape[0])
        area = np.empty(a.shape[0])
        for s in range(0, a.shape[0], chunk):
            sl = slice(s, s + chunk)
            pts, wts, _ = self.nodes(a[sl], b[sl], c[sl])
            vals = np.asarray(fn(pts.reshape(-1, 3)), dtype=float).reshape(wts.shape)
            out[sl] = (vals * wts).sum(axis=1)
            area[sl] = wts.sum(axis=1)
        return (out, area) if with_area else out


DEFAULT_RULE = QuadratureRule(2, "degree5")
