"""Icosahedral Delaunay triangulations of the sphere and their Voronoi duals."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .geometry import geodesic_distance


class GridError(ValueError):
    """Raised for malformed or degenerate grids."""


class DelaunayViolation(GridError):
    pass


class GridFormatError(GridError):
    """Malformed SVDGRID text."""


@dataclass(eq=False)
class DelaunayGrid:
    """Geodesic triangulation of the unit sphere.

    Attributes
    ----------
    level : int
        Refinement level; the base icosahedron is level 0.
    vertices : ndarray, shape (N, 3)
    triangles : ndarray, shape (F, 3)
        Vertex indices, counterclockwise seen from outside the sphere.

    Edge arrays are derived from ``triangles`` on first access. Edge ``e``
    joins ``edges[e] = (i, j)`` with ``i < j``; ``edge_tris[e] = (t1, t2)``
    where ``t1`` traverses the edge as ``i -> j`` and ``t2`` as ``j -> i``.
    """

    level: int
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise GridError("vertices must have shape (N, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise GridError("triangles must have shape (F, 3)")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def _topology(self):
        return _edge_topology(self.triangles, self.n_vertices)

    @property
    def edges(self) -> np.ndarray:
        return self._topology[0]

    @property
    def edge_tris(self) -> np.ndarray:
        return self._topology[1]

    @property
    def tri_edges(self) -> np.ndarray:
        """Edge index of local edges (a-b, b-c, c-a) of each triangle."""
        return self._topology[2]

    @cached_property
    def tri_neighbors(self) -> np.ndarray:
        """Triangle across local edges (a-b, b-c, c-a)."""
        et = self.edge_tris
        te = self.tri_edges
        own = np.arange(self.n_triangles)[:, None]
        a, b = et[te, 0], et[te, 1]
        return np.where(a == own, b, a)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    def with_vertices(self, vertices) -> "DelaunayGrid":
        """Same connectivity, relocated vertices (topology cache is shared)."""
        g = DelaunayGrid(self.level, vertices, self.triangles)
        if "_topology" in self.__dict__:
            g.__dict__["_topology"] = self._topology
        return g

    @cached_property
    def vertex_rings(self) -> tuple[np.ndarray, np.ndarray]:
        """Incident triangles of every vertex in counterclockwise order.

        Returns ``(ring, degree)``: ``ring`` is padded with ``-1`` to the
        maximum degree.
        """
        return _vertex_rings(self.triangles, self.n_vertices)


def _edge_topology(tris: np.ndarray, n: int):
    f = tris.shape[0]
    u = tris.reshape(-1)
    v = np.roll(tris, -1, axis=1).reshape(-1)
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    key = lo * n + hi
    uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    if np.any(counts != 2):
        raise GridError("every edge must be shared by exactly two triangles")
    edges = np.stack([uniq // n, uniq % n], axis=1)
    half_tri = np.repeat(np.arange(f), 3)
    forward = u < v
    edge_tris = np.empty((uniq.size, 2), dtype=np.int64)
    fwd_count = np.bincount(inv[forward], minlength=uniq.size)
    if np.any(fwd_count != 1):
        raise GridError("inconsistent triangle orientation")
    edge_tris[inv[forward], 0] = half_tri[forward]
    edge_tris[inv[~forward], 1] = half_tri[~forward]
    tri_edges = inv.reshape(f, 3)
    return edges, edge_tris, tri_edges


def _vertex_rings(tris: np.ndarray, n: int):
    f = tris.shape[0]
    u = tris.reshape(-1)
    half_key = u * n + np.roll(tris, -1, axis=1).reshape(-1)
    order = np.argsort(half_key)
    sorted_keys = half_key[order]
    half_tri = np.repeat(np.arange(f), 3)

    def tri_of_half(a, b):
        k = a * n + b
        pos = np.searchsorted(sorted_keys, k)
        return half_tri[order[pos]]

    # the next triangle counterclockwise around u holds the half-edge u -> w
    first = np.full(n, -1, dtype=np.int64)
    first[u[::-1]] = half_tri[::-1]
    degree = np.bincount(u, minlength=n)
    maxdeg = int(degree.max())
    ring = np.full((n, maxdeg), -1, dtype=np.int64)
    ring[:, 0] = first
    verts = np.arange(n)
    cur = first.copy()
    for k in range(1, maxdeg):
        corner = np.argmax(tris[cur] == verts[:, None], axis=1)
        prev = tris[cur, (corner + 2) % 3]
        cur = tri_of_half(verts, prev)
        active = k < degree
        ring[active, k] = cur[active]
    return ring, degree


def _orient(vertices, tris):
    a, b, c = (vertices[tris[:, k]] for k in range(3))
    s = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c)
    tris = tris.copy()
    flip = s < 0
    tris[flip, 1], tris[flip, 2] = tris[flip, 2].copy(), tris[flip, 1].copy()
    return tris


def build_icosahedron() -> DelaunayGrid:
    """Level-0 grid: poles at +-e3 and two rings of five at lat +-arctan(1/2)."""
    lat = math.atan(0.5)
    verts = [(0.0, 0.0, 1.0)]
    for k in range(5):
        lon = 2.0 * math.pi * k / 5.0
        verts.append((math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)))
    for k in range(5):
        lon = 2.0 * math.pi * (k + 0.5) / 5.0
        verts.append((math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), -math.sin(lat)))
    verts.append((0.0, 0.0, -1.0))
    tris = []
    for k in range(5):
        k1 = (k + 1) % 5
        tris.append((0, 1 + k, 1 + k1))
        tris.append((1 + k, 6 + k, 1 + k1))
        tris.append((1 + k1, 6 + k, 6 + k1))
        tris.append((11, 6 + k1, 6 + k))
    vertices = np.array(verts)
    return DelaunayGrid(0, vertices, _orient(vertices, np.array(tris)))


def refine(g: DelaunayGrid) -> DelaunayGrid:
    """Split every triangle into four at its geodesic edge midpoints.

    Existing vertices keep their indices; the midpoint of edge ``e`` becomes
    vertex ``N + e``.
    """
    n = g.n_vertices
    e = g.edges
    mid = g.vertices[e[:, 0]] + g.vertices[e[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    verts = np.concatenate([g.vertices, mid])
    a, b, c = g.triangles.T
    mab, mbc, mca = (n + g.tri_edges[:, k] for k in range(3))
    children = np.stack([
        np.stack([a, mab, mca], axis=1),
        np.stack([mab, b, mbc], axis=1),
        np.stack([mca, mbc, c], axis=1),
        np.stack([mab, mbc, mca], axis=1),
    ], axis=1).reshape(-1, 3)
    return DelaunayGrid(g.level + 1, verts, children)


def build_grid(level: int) -> DelaunayGrid:
    g = build_icosahedron()
    for _ in range(level):
        g = refine(g)
    return g


@dataclass(eq=False)
class VoronoiDual:
    """Voronoi cells of a :class:`DelaunayGrid`.

    Per-edge arrays are indexed like ``grid.edges``. The dual edge of primal
    edge ``e`` runs between the circumcenters of ``grid.edge_tris[e]``.
    """

    grid: DelaunayGrid
    circumcenters: np.ndarray
    circumradii: np.ndarray
    cell_areas: np.ndarray
    dual_lengths: np.ndarray
    vertex_distances: np.ndarray
    chord_lengths: np.ndarray
    h_cells: np.ndarray
    h: float = field(init=False)

    def __post_init__(self):
        self.h = float(self.h_cells.max())

    @property
    def n_cells(self) -> int:
        return self.cell_areas.size

    @cached_property
    def cells(self) -> list[np.ndarray]:
        """Circumcenter (triangle) indices of each cell, counterclockwise."""
        ring, degree = self.grid.vertex_rings
        return [ring[i, : degree[i]] for i in range(ring.shape[0])]

    def cell_polygon(self, i: int) -> np.ndarray:
        return self.circumcenters[self.cells[i]]

    @cached_property
    def neighbor_sets(self) -> list[np.ndarray]:
        e = self.grid.edges
        owner = np.concatenate([e[:, 0], e[:, 1]])
        other = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((other, owner))
        split = np.cumsum(np.bincount(owner, minlength=self.n_cells))[:-1]
        return np.split(other[order], split)

    def dual_edge_midpoints(self) -> np.ndarray:
        et = self.grid.edge_tris
        m = self.circumcenters[et[:, 0]] + self.circumcenters[et[:, 1]]
        return m / np.linalg.norm(m, axis=1)[:, None]

    def fan_triangles(self):
        """Fan decomposition of all cells.

        Returns ``(owner, a, b, c)``: fan triangle ``k`` belongs to cell
        ``owner[k]`` and has counterclockwise vertices ``a[k], b[k], c[k]``
        with ``a`` the generator.
        """
        g = self.grid
        e, et = g.edges, g.edge_tris
        q1 = self.circumcenters[et[:, 0]]
        q2 = self.circumcenters[et[:, 1]]
        x = g.vertices
        owner = np.concatenate([e[:, 0], e[:, 1]])
        a = x[owner]
        b = np.concatenate([q2, q1])
        c = np.concatenate([q1, q2])
        return owner, a, b, c


def build_voronoi_dual(g: DelaunayGrid, check: bool = True) -> VoronoiDual:
    """Voronoi dual with all measures.

    With ``check=True`` a Delaunay violation raises :class:`DelaunayViolation`.
    """
    if check:
        rep = check_delaunay(g)
        if not rep.passed:
            raise DelaunayViolation(
                f"Delaunay criterion violated: vertex {rep.worst_vertex} lies inside the "
                f"circumcircle of triangle {rep.worst_triangle} (margin {rep.worst_margin:.3e})"
            )
    x = g.vertices
    q, r, areas, _ = kernels.dual_measures(x, g.triangles, g.edges, g.edge_tris)
    e, et = g.edges, g.edge_tris
    lengths = geodesic_distance(q[et[:, 0]], q[et[:, 1]])
    xi, xj = x[e[:, 0]], x[e[:, 1]]
    dist = geodesic_distance(xi, xj)
    chord = np.linalg.norm(xj - xi, axis=1)
    h_cells = np.zeros(g.n_vertices)
    for k in range(3):
        np.maximum.at(h_cells, g.triangles[:, k], r)
    return VoronoiDual(g, q, r, areas, lengths, dist, chord, h_cells)


@dataclass
class DelaunayReport:
    passed: bool
    worst_margin: float
    worst_triangle: int
    worst_vertex: int
    tolerance: float = 1e-10

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"delaunay: {status} (worst margin {self.worst_margin:.3e} at triangle {self.worst_triangle})"


def triangle_margins(g: DelaunayGrid):
    """Per triangle: ``min d(q, v) - r`` over vertices ``v`` not in the triangle.

    Returns ``(margin, nearest_outside_vertex)``.
    """
    x = g.vertices
    t = g.triangles
    q, r = kernels.circumcenters(x, t)
    k = min(4, g.n_vertices)
    _, idx = cKDTree(x).query(q, k=k)
    member = (idx[:, :, None] == t[:, None, :]).any(axis=2)
    d = geodesic_distance(q[:, None, :], x[idx])
    d = np.where(member, np.inf, d)
    j = np.argmin(d, axis=1)
    nearest = idx[np.arange(len(t)), j]
    return d[np.arange(len(t)), j] - r, nearest


def check_delaunay(g: DelaunayGrid, tol: float = 1e-10) -> DelaunayReport:
    margin, nearest = triangle_margins(g)
    worst = int(np.argmin(margin))
    return DelaunayReport(
        passed=bool(margin[worst] >= -tol),
        worst_margin=float(margin[worst]),
        worst_triangle=worst,
        worst_vertex=int(nearest[worst]),
        tolerance=tol,
    )


@dataclass
class UniformityReport:
    """Almost-uniformity constants of a dual grid.

    ``c0`` bounds ``m_l(Gamma_ij) / h`` and its inverse, ``c1`` bounds
    ``m_a(V_i) / h**2`` and its inverse.
    """

    h: float
    c0: float
    c1: float
    min_edge: float
    max_edge: float
    min_area: float
    max_area: float


def check_uniformity(d: VoronoiDual) -> UniformityReport:
    h = d.h
    le = d.dual_lengths
    ar = d.cell_areas
    with np.errstate(divide="ignore"):
        c0 = max(le.max() / h, h / le.min() if le.min() > 0 else math.inf)
        c1 = max(ar.max() / h**2, h**2 / ar.min() if ar.min() > 0 else math.inf)
    return UniformityReport(h, float(c0), float(c1), float(le.min()), float(le.max()),
                            float(ar.min()), float(ar.max()))


# -- SVDGRID text format -----------------------------------------------------

MAGIC = "SVDGRID"


def format_grid(g: DelaunayGrid) -> str:
    buf = io.StringIO()
    buf.write(f"{MAGIC} 1 {g.level} {g.n_vertices} {g.n_triangles}\n")
    for p in g.vertices:
        buf.write("v {:.17g} {:.17g} {:.17g}\n".format(*p))
    for t in g.triangles:
        buf.write("t {} {} {}\n".format(*t))
    return buf.getvalue()


def parse_grid(text: str) -> DelaunayGrid:
    lines = text.splitlines()
    if not lines:
        raise GridFormatError("empty grid file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != MAGIC or head[1] != "1":
        raise GridFormatError(f"bad header: {lines[0]!r}")
    try:
        return _parse_body(lines, head)
    except ValueError as exc:
        if isinstance(exc, GridError):
            raise
        raise GridFormatError(f"malformed number: {exc}") from None


def _parse_body(lines, head) -> DelaunayGrid:
    level, n, f = int(head[2]), int(head[3]), int(head[4])
    body = lines[1:]
    if len(body) < n + f:
        raise GridFormatError(f"expected {n} vertices and {f} triangles, file too short")
    verts = np.empty((n, 3))
    for k in range(n):
        parts = body[k].split()
        if len(parts) != 4 or parts[0] != "v":
            raise GridFormatError(f"line {k + 2}: expected vertex record")
        verts[k] = [float(s) for s in parts[1:]]
    tris = np.empty((f, 3), dtype=np.int64)
    for k in range(f):
        parts = body[n + k].split()
        if len(parts) != 4 or parts[0] != "t":
            raise GridFormatError(f"line {n + k + 2}: expected triangle record")
        tris[k] = [int(s) for s in parts[1:]]
    if tris.min() < 0 or tris.max() >= n:
        raise GridFormatError("triangle index out of range")
    return DelaunayGrid(level, verts, tris)


def write_grid(g: DelaunayGrid, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_grid(g))


def read_grid(path: str | os.PathLike) -> DelaunayGrid:
    with open(path, encoding="utf-8") as fh:
        return parse_grid(fh.read())
