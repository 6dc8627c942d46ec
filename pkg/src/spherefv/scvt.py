"""Spherical centroidal Voronoi tessellations by Lloyd iteration (density 1)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import GeometryError, polygon_moment, spherical_triangle_area
from .grid import DelaunayGrid, DelaunayViolation, build_icosahedron, check_delaunay, refine

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500


@dataclass
class LloydReport:
    iterations: int
    final_max_move: float
    energy_trace: list[float] = field(default_factory=list)
    converged: bool = False


def constrained_centroid(polygon, generator=None) -> np.ndarray:
    """Sphere-constrained mass centroid of a spherical polygon.

    The minimizer of ``F(x) = int_V |y - x|^2 ds(y)`` over unit ``x`` is
    ``m / |m|`` with ``m = int_V y ds``; ``m`` is evaluated in closed form.
    If ``generator`` is given the polygon orientation is taken relative to
    it, so clockwise input is accepted.
    """
    poly = np.asarray(polygon, dtype=float)
    m = polygon_moment(poly)
    if generator is not None:
        g = np.asarray(generator, dtype=float)
        nxt = np.roll(poly, -1, axis=0)
        signed = np.sign(np.einsum("ij,ij->i", np.broadcast_to(g, poly.shape), np.cross(poly, nxt)))
        if np.sum(signed * spherical_triangle_area(g, poly, nxt)) < 0:
            m = -m
    nm = np.linalg.norm(m)
    if nm <= 1e-300:
        raise GeometryError("centroid undefined")
    return m / nm


def energy(g: DelaunayGrid) -> float:
    """Quantization energy ``sum_i int_Vi |y - x_i|^2 ds(y)``.

    On the unit sphere the integrand is ``2 - 2 x_i . y``, so each cell
    contributes ``2 m_a(V_i) - 2 x_i . m_i`` with the exact moment ``m_i``.
    """
    _, _, areas, moments = kernels.dual_measures(g.vertices, g.triangles, g.edges, g.edge_tris)
    return float(np.sum(2.0 * areas - 2.0 * np.einsum("ij,ij->i", g.vertices, moments)))


def lloyd_step(g: DelaunayGrid) -> tuple[DelaunayGrid, float, float]:
    """Move every generator to its constrained centroid.

    Returns the new grid, the largest move in radians and the energy of the
    input grid.
    """
    try:
        x, move, e = kernels.lloyd_step(g.vertices, g.triangles, g.edges, g.edge_tris)
    except ZeroDivisionError as exc:
        raise GeometryError("centroid undefined") from exc
    return g.with_vertices(x), move, e


def lloyd_optimize(g: DelaunayGrid, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   check: bool = True) -> tuple[DelaunayGrid, LloydReport]:
    """Lloyd iteration with fixed icosahedral connectivity.

    Iterates until the largest generator move drops below ``tol`` (radians)
    or ``max_iter`` steps have run. The Delaunay criterion is verified on the
    result; a violation raises :class:`DelaunayViolation`.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 0:
        raise ValueError("max_iter must be nonnegative")
    if max_iter == 0:
        return g, LloydReport(0, 0.0, [], False)
    trace = []
    move = np.inf
    it = 0
    cur = g
    converged = False
    while it < max_iter:
        nxt, move, e = lloyd_step(cur)
        trace.append(e)
        it += 1
        if move < tol:
            # already centroidal within tol: keep the grid the energy was measured on
            converged = True
            break
        cur = nxt
    if not converged:
        trace.append(energy(cur))
    logger.info("lloyd level %d: %d iterations, max move %.3e", g.level, it, move)
    if check:
        rep = check_delaunay(cur)
        if not rep.passed:
            raise DelaunayViolation(
                f"Lloyd iteration broke the Delaunay criterion (margin {rep.worst_margin:.3e} at "
                f"triangle {rep.worst_triangle}); try fewer iterations or a different level"
            )
    return cur, LloydReport(it, float(move), trace, converged)


def build_scvt(level: int, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """SCVT grid at ``level``, each level warm-started from the refined coarser one.

    Returns the grid and the list of per-level reports.
    """
    g = build_icosahedron()
    g, rep = lloyd_optimize(g, tol, max_iter)
    reports = [rep]
    for _ in range(level):
        g, rep = lloyd_optimize(refine(g), tol, max_iter)
        reports.append(rep)
    return g, reports
