"""Voronoi finite volume discretization of ``-Lap_s u = f``.

Row ``i`` of the assembled system is the cell balance multiplied by the cell
area::

    sum_{j in N(i)} c_ij (u_i - u_j) = int_{V_i} f ds,   c_ij = |Gamma_ij| / |x_i - x_j|

which keeps the matrix symmetric. Dividing a row by ``m_a(V_i)`` recovers the
per-cell averaged form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .grid import DelaunayGrid, GridError, VoronoiDual
from .quadrature import DEFAULT_RULE, QuadratureRule


@dataclass
class NodalField:
    """One value per grid vertex."""

    values: np.ndarray
    grid: DelaunayGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_vertices,):
            raise ValueError(
                f"field has {self.values.shape} values, grid has {self.grid.n_vertices} vertices"
            )

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size

    def evaluate(self, points, hint: int = 0) -> np.ndarray:
        """Value of the lifted piecewise-linear function at points on the sphere."""
        from .metrics import evaluate_lifted

        return evaluate_lifted(self.grid, self.values, points, hint)


@dataclass
class SparseSystem:
    """Symmetric flux matrix with integrated right-hand side.

    ``rhs`` has its plain mean removed; ``raw_rhs_sum`` keeps the quadrature
    defect ``sum_i int_Vi f ds`` that was removed.
    """

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    cell_areas: np.ndarray
    coefficients: np.ndarray
    dual: VoronoiDual
    raw_rhs_sum: float = 0.0
    diagonal: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.diagonal = self.matrix.diagonal()

    @property
    def size(self) -> int:
        return self.rhs.size


def edge_coefficients(dual: VoronoiDual) -> np.ndarray:
    """``c_ij = m_l(Gamma_ij) / |x_i - x_j|`` per primal edge."""
    if np.any(dual.dual_lengths <= 0.0):
        bad = int(np.argmin(dual.dual_lengths))
        raise GridError(f"degenerate grid: dual edge {bad} has zero length")
    return dual.dual_lengths / dual.chord_lengths


def edge_index(grid: DelaunayGrid, i, j):
    """Edge index of vertex pairs; ``-1`` where ``i`` and ``j`` are not neighbors."""
    i = np.asarray(i)
    j = np.asarray(j)
    n = grid.n_vertices
    keys = grid.edges[:, 0] * n + grid.edges[:, 1]
    k = np.minimum(i, j) * n + np.maximum(i, j)
    pos = np.clip(np.searchsorted(keys, k), 0, keys.size - 1)
    return np.where(keys[pos] == k, pos, -1)


def edge_fluxes(u, dual: VoronoiDual) -> np.ndarray:
    """Flux ``F_ij`` from the lower to the higher vertex index of every edge.

    The reverse flux is exactly the negation of the same number.
    """
    u = np.asarray(u, dtype=float)
    e = dual.grid.edges
    return -dual.dual_lengths * (u[e[:, 1]] - u[e[:, 0]]) / dual.chord_lengths


def discrete_flux(u, dual: VoronoiDual, i: int, j: int) -> float:
    """Central-difference flux ``-m_l(Gamma_ij) (u_j - u_i) / |x_j - x_i|``."""
    k = int(edge_index(dual.grid, i, j))
    if k < 0 or i == j:
        raise ValueError(f"vertex {j} is not a neighbor of vertex {i}")
    u = np.asarray(u, dtype=float)
    lo, hi = dual.grid.edges[k]
    flux = -dual.dual_lengths[k] * (u[hi] - u[lo]) / dual.chord_lengths[k]
    return float(flux if i == lo else -flux)


def cell_flux_sums(u, dual: VoronoiDual) -> np.ndarray:
    """``sum_{j in N(i)} F_ij`` for every cell."""
    fl = edge_fluxes(u, dual)
    e = dual.grid.edges
    n = dual.n_cells
    return np.bincount(e[:, 0], fl, minlength=n) - np.bincount(e[:, 1], fl, minlength=n)


def cell_integrals(f, dual: VoronoiDual, rule: QuadratureRule | None = None) -> np.ndarray:
    """``int_{V_i} f ds`` for all cells by quadrature over the generator fans.

    The quadrature mean ``Q(f) / Q(1)`` is scaled by the exact cell area,
    which makes the result exact for constants.
    """
    rule = rule or DEFAULT_RULE
    owner, a, b, c = dual.fan_triangles()
    return _fan_mean(f, owner, a, b, c, rule, dual.n_cells) * dual.cell_areas


def _fan_mean(f, owner, a, b, c, rule, n):
    vals, ones = rule.integrate_triangles(f, a, b, c, with_area=True)
    return np.bincount(owner, vals, minlength=n) / np.bincount(owner, ones, minlength=n)


def source_average(f, dual: VoronoiDual, i: int | None = None,
                   rule: QuadratureRule | None = None):
    """Cell mean of ``f``; all cells when ``i`` is None."""
    rule = rule or DEFAULT_RULE
    if i is None:
        return cell_integrals(f, dual, rule) / dual.cell_areas
    owner, a, b, c = dual.fan_triangles()
    sel = owner == i
    return float(_fan_mean(f, np.zeros(int(sel.sum()), dtype=np.int64), a[sel], b[sel], c[sel], rule, 1)[0])


def flux_matrix(dual: VoronoiDual) -> tuple[sparse.csr_matrix, np.ndarray]:
    c = edge_coefficients(dual)
    e = dual.grid.edges
    n = dual.n_cells
    diag = np.bincount(e[:, 0], c, minlength=n) + np.bincount(e[:, 1], c, minlength=n)
    rows = np.concatenate([e[:, 0], e[:, 1], np.arange(n)])
    cols = np.concatenate([e[:, 1], e[:, 0], np.arange(n)])
    vals = np.concatenate([-c, -c, diag])
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    return mat, c


def assemble(dual: VoronoiDual, f=None, rule: QuadratureRule | None = None) -> SparseSystem:
    """Assemble the area-scaled finite volume system for forcing ``f``."""
    mat, c = flux_matrix(dual)
    if f is None:
        b = np.zeros(dual.n_cells)
    else:
        b = cell_integrals(f, dual, rule)
    raw = float(b.sum())
    b = b - b.mean()
    return SparseSystem(mat, b, dual.cell_areas.copy(), c, dual, raw)


def apply_operator(system: SparseSystem, u) -> np.ndarray:
    """Per-cell residual ``(A u - b) / m_a(V_i)`` of the averaged scheme."""
    u = np.asarray(u, dtype=float)
    if u.shape != (system.size,):
        raise ValueError(f"field of shape {u.shape} does not match system of size {system.size}")
    return (system.matrix @ u - system.rhs) / system.cell_areas
