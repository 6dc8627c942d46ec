"""Interpolation, integration and error norms on icosahedral grids.

Nodal values define a continuous function on the sphere by lifting the
piecewise-linear interpolant on the flat triangles radially: the value at a
point ``y`` is the linear interpolant at the pre-image ``x*`` of ``y`` on the
flat triangle whose cone contains ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .discretization import NodalField
from .grid import DelaunayGrid, VoronoiDual
from .quadrature import DEFAULT_RULE, QuadratureRule

BARY_TOL = 1e-12


def interp_nodal(u, grid: DelaunayGrid) -> NodalField:
    """Nodal interpolant of a field on the sphere."""
    return NodalField(np.asarray(u(grid.vertices), dtype=float), grid)


def interp_piecewise_const(u, dual: VoronoiDual) -> np.ndarray:
    """Cellwise constant interpolant: cell ``i`` carries the value at its generator.

    ``u`` may be a field on the sphere or nodal values (``NodalField`` or array).
    """
    if callable(u):
        return np.asarray(u(dual.grid.vertices), dtype=float)
    vals = np.asarray(u, dtype=float)
    if vals.shape != (dual.n_cells,):
        raise ValueError("nodal values do not match the dual grid")
    return vals.copy()


def cell_of(dual: VoronoiDual, points) -> np.ndarray:
    """Voronoi cell containing each point (nearest generator)."""
    _, idx = cKDTree(dual.grid.vertices).query(np.asarray(points, dtype=float).reshape(-1, 3))
    return idx


def _cone_inverse(grid: DelaunayGrid) -> np.ndarray:
    cache = grid.__dict__.get("_cone_inverse")
    if cache is None:
        m = np.transpose(grid.vertices[grid.triangles], (0, 2, 1))  # columns a, b, c
        cache = np.linalg.inv(m)
        grid.__dict__["_cone_inverse"] = cache
    return cache


def locate(grid: DelaunayGrid, points, hint=None):
    """Find the triangle whose cone contains each point by walking adjacency.

    ``hint`` is a starting triangle (scalar or per point); when omitted the
    walk starts at a triangle of the nearest vertex. Returns the triangle
    indices and the flat-triangle barycentric coordinates.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    inv = _cone_inverse(grid)
    nbr = grid.tri_neighbors
    if hint is None:
        ring, _ = grid.vertex_rings
        _, near = cKDTree(grid.vertices).query(p)
        tri = ring[near, 0].copy()
    else:
        tri = np.broadcast_to(np.asarray(hint, dtype=np.int64), (p.shape[0],)).copy()
    lam = np.einsum("nij,nj->ni", inv[tri], p)
    active = np.arange(p.shape[0])
    limit = 4 * int(math.sqrt(grid.n_triangles)) + 20
    for _ in range(limit):
        worst = np.argmin(lam[active], axis=1)
        low = lam[active, worst] < -BARY_TOL
        if not low.any():
            break
        active = active[low]
        worst = worst[low]
        # vertex k is opposite local edge (k + 1) % 3
        tri[active] = nbr[tri[active], (worst + 1) % 3]
        lam[active] = np.einsum("nij,nj->ni", inv[tri[active]], p[active])
    else:
        raise RuntimeError("point location did not terminate")
    lam = lam / lam.sum(axis=1, keepdims=True)
    return tri, lam


def evaluate_lifted(grid: DelaunayGrid, values, points, hint=None) -> np.ndarray:
    """Evaluate the lifted piecewise-linear function at points on the sphere."""
    pts = np.asarray(points, dtype=float)
    tri, lam = locate(grid, pts, hint)
    vals = np.asarray(values, dtype=float)[grid.triangles[tri]]
    return np.einsum("ij,ij->i", vals, lam).reshape(pts.shape[:-1])


def planar_gradients(grid: DelaunayGrid, values, tris=None) -> np.ndarray:
    """Gradient of the linear interpolant on each flat triangle (in its plane)."""
    t = grid.triangles if tris is None else grid.triangles[tris]
    a, b, c = (grid.vertices[t[:, k]] for k in range(3))
    n = np.cross(b - a, c - a)
    n2 = np.einsum("ij,ij->i", n, n)[:, None]
    u = np.asarray(values, dtype=float)[t]
    return (u[:, 0, None] * np.cross(n, c - b) + u[:, 1, None] * np.cross(n, a - c)
            + u[:, 2, None] * np.cross(n, b - a)) / n2


def lifted_gradient(grid: DelaunayGrid, values, tris, points) -> np.ndarray:
    """Tangential gradient of the lifted function at ``points`` in triangles ``tris``.

    For unit plane normal ``n`` at distance ``d`` the pre-image is
    ``x*(y) = d y / (n . y)``; the chain rule gives
    ``P_y [d / (n.y)] (g - n (y.g) / (n.y))`` with ``g`` the planar gradient.
    """
    t = grid.triangles[tris]
    a, b, c = (grid.vertices[t[:, k]] for k in range(3))
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1)[:, None]
    d = np.einsum("ij,ij->i", n, a)
    g = planar_gradients(grid, values, tris)
    y = np.asarray(points, dtype=float)
    ny = np.einsum("ij,ij->i", n, y)
    yg = np.einsum("ij,ij->i", y, g)
    v = (d / ny)[:, None] * (g - n * (yg / ny)[:, None])
    return v - np.einsum("ij,ij->i", v, y)[:, None] * y


def integrate(g, grid: DelaunayGrid, rule: QuadratureRule | None = None) -> float:
    """Integral of a field over the sphere, summed over the geodesic triangles."""
    rule = rule or DEFAULT_RULE
    t = grid.triangles
    x = grid.vertices
    per_tri = rule.integrate_triangles(g, x[t[:, 0]], x[t[:, 1]], x[t[:, 2]])
    return float(per_tri.sum())


@dataclass
class ErrorReport:
    err_L2: float
    err_H1: float
    err_max: float
    err_W1inf: float
    cr_L2: float | None = None
    cr_H1: float | None = None
    cr_max: float | None = None
    cr_W1inf: float | None = None

    NORMS = ("L2", "H1", "max", "W1inf")

    def errors(self) -> dict[str, float]:
        return {k: getattr(self, f"err_{k}") for k in self.NORMS}

    def rates(self) -> dict[str, float | None]:
        return {k: getattr(self, f"cr_{k}") for k in self.NORMS}

    def with_rates_from(self, prev: "ErrorReport") -> "ErrorReport":
        kw = self.errors()
        out = ErrorReport(**{f"err_{k}": v for k, v in kw.items()})
        for k in self.NORMS:
            a, b = getattr(prev, f"err_{k}"), getattr(self, f"err_{k}")
            setattr(out, f"cr_{k}", convergence_rate(a, b) if a > 0 and b > 0 else None)
        return out


SAMPLE_RULE = QuadratureRule(2, "midpoint")


def norms(u, grad_u, values, grid: DelaunayGrid, rule: QuadratureRule | None = None,
          chunk: int = 8192, sample_rule: QuadratureRule | None = None) -> ErrorReport:
    """Errors of the lifted nodal field ``values`` against the exact ``u``.

    L2 and H1 (gradient seminorm) are integrated with ``rule``. The max error
    is taken over the vertices and the nodes of ``sample_rule`` (edge
    midpoints of a twice-subdivided triangle by default); W1inf is the larger
    of the max error and the largest gradient error over the same nodes and
    the triangle centroids.
    """
    rule = rule or DEFAULT_RULE
    sample_rule = sample_rule or SAMPLE_RULE
    values = np.asarray(values, dtype=float)
    x = grid.vertices
    t = grid.triangles
    l2 = 0.0
    h1 = 0.0
    emax = float(np.max(np.abs(u(x) - values), initial=0.0))
    gmax = 0.0
    for s in range(0, grid.n_triangles, chunk):
        idx = np.arange(s, min(s + chunk, grid.n_triangles))
        tt = t[idx]
        a, b, c = x[tt[:, 0]], x[tt[:, 1]], x[tt[:, 2]]
        pts, wts, lam = rule.nodes(a, b, c)
        k = pts.shape[1]
        uh = np.einsum("tj,kj->tk", values[tt], lam)
        err = u(pts) - uh
        l2 += float(np.sum(wts * err * err))
        gerr = grad_u(pts.reshape(-1, 3)) - lifted_gradient(grid, values, np.repeat(idx, k), pts.reshape(-1, 3))
        h1 += float(np.sum(wts.reshape(-1) * np.einsum("ij,ij->i", gerr, gerr)))

        spts, _, slam = sample_rule.nodes(a, b, c)
        ks = spts.shape[1]
        serr = u(spts) - np.einsum("tj,kj->tk", values[tt], slam)
        emax = max(emax, float(np.abs(serr).max()))
        cen = x[tt].sum(axis=1)
        cen /= np.linalg.norm(cen, axis=1)[:, None]
        allpts = np.concatenate([spts.reshape(-1, 3), cen])
        alltri = np.concatenate([np.repeat(idx, ks), idx])
        gs = grad_u(allpts) - lifted_gradient(grid, values, alltri, allpts)
        gmax = max(gmax, float(np.sqrt(np.einsum("ij,ij->i", gs, gs).max())))
    return ErrorReport(math.sqrt(l2), math.sqrt(h1), emax, max(emax, gmax))


def lifted_l2(values, grid: DelaunayGrid, rule: QuadratureRule | None = None,
              chunk: int = 16384) -> float:
    """L2 norm on the sphere of the lifted piecewise-linear function."""
    rule = rule or DEFAULT_RULE
    values = np.asarray(values, dtype=float)
    x, t = grid.vertices, grid.triangles
    total = 0.0
    for s in range(0, grid.n_triangles, chunk):
        tt = t[s:s + chunk]
        _, wts, lam = rule.nodes(x[tt[:, 0]], x[tt[:, 1]], x[tt[:, 2]])
        uh = np.einsum("tj,kj->tk", values[tt], lam)
        total += float(np.sum(wts * uh * uh))
    return math.sqrt(total)


def discrete_l2(values, dual: VoronoiDual, p: int = 2) -> float:
    """Discrete norm ``(sum_i m_a(V_i) |u_i|**p)**(1/p)``."""
    v = np.abs(np.asarray(values, dtype=float))
    return float(np.sum(dual.cell_areas * v**p) ** (1.0 / p))


def discrete_seminorm(values, dual: VoronoiDual, p: int = 2) -> float:
    """``(sum_i sum_j 1/2 m_l(Gamma_ij) d(x_i, x_j) |(u_i - u_j)/|x_i - x_j||**p)**(1/p)``.

    The double sum visits every edge twice, so it equals the edge sum without
    the factor one half.
    """
    if p not in (1, 2):
        raise ValueError(f"unsupported exponent p={p}; use 1 or 2")
    u = np.asarray(values, dtype=float)
    e = dual.grid.edges
    q = np.abs(u[e[:, 0]] - u[e[:, 1]]) / dual.chord_lengths
    return float(np.sum(dual.dual_lengths * dual.vertex_distances * q**p) ** (1.0 / p))


def convergence_rate(e_prev: float, e_next: float) -> float:
    """``|ln e_next - ln e_prev| / ln 2`` for consecutive halvings of h."""
    if not (e_prev > 0 and e_next > 0):
        raise ValueError("errors must be positive to form a convergence rate")
    return abs(math.log(e_next) - math.log(e_prev)) / math.log(2.0)
