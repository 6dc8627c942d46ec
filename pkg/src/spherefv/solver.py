"""Conjugate gradients for the singular flux system.

The matrix is symmetric positive semidefinite with the constants as kernel.
The right-hand side must be orthogonal to the constants; the iterates are
kept in that complement and the returned solution is shifted to zero
area-weighted mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import SparseSystem


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


class IncompatibleSource(SolverError):
    pass


@dataclass
class SolveOptions:
    rel_tol: float = 1e-10
    max_iter: int | None = None  # 10 * sqrt(N) when None
    guard: int = 50
    preconditioner: str | None = None  # None or "jacobi"

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.guard < 1:
            raise ValueError("guard must be at least 1")
        if self.preconditioner not in (None, "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")

    def iteration_limit(self, n: int) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return max(1, math.ceil(10.0 * math.sqrt(n)))


@dataclass
class SolveReport:
    iterations: int
    final_relative_residual: float
    mean_of_solution: float
    history: list[float] = field(default_factory=list, repr=False)


def deflate(v, areas) -> np.ndarray:
    """Remove the ``areas``-weighted mean: ``v - (sum a v / sum a)``."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(areas, dtype=float)
    if v.shape != a.shape:
        raise ValueError("value and weight arrays differ in length")
    total = a.sum()
    if not total > 0:
        raise ValueError("weights must have positive sum")
    return v - np.dot(a, v) / total


def _project(v):
    return v - v.mean()


def solve(system: SparseSystem, opts: SolveOptions | None = None,
          callback=None) -> tuple[np.ndarray, SolveReport]:
    """Solve ``A u = b`` with zero area-weighted mean.

    ``callback(x)`` is called with the current iterate after every step.

    Raises :class:`IncompatibleSource` when ``b`` has a constant component
    and :class:`ConvergenceError` when the tolerance is not met within the
    iteration limit.
    """
    opts = opts or SolveOptions()
    A = system.matrix
    b = np.asarray(system.rhs, dtype=float)
    n = b.size
    areas = system.cell_areas
    bnorm1 = np.abs(b).sum()
    if abs(b.sum()) > 1e-8 * bnorm1:
        raise IncompatibleSource(
            f"incompatible source: sum of right-hand side {b.sum():.3e} is not negligible"
        )
    bnorm = math.sqrt(np.dot(b, b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, 0.0)

    b = _project(b)
    if opts.preconditioner == "jacobi":
        dinv = 1.0 / system.diagonal
    else:
        dinv = None
    x = np.zeros(n)
    r = b.copy()
    z = _project(dinv * r) if dinv is not None else r
    p = z.copy()
    rz = np.dot(r, z)
    history = [1.0]
    limit = opts.iteration_limit(n)
    it = 0
    rel = 1.0
    while it < limit:
        Ap = A @ p
        pAp = np.dot(p, Ap)
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if it % opts.guard == 0:
            x = _project(x)
            r = _project(b - A @ x)
        if callback is not None:
            callback(x)
        rel = math.sqrt(np.dot(r, r)) / bnorm
        if rel <= opts.rel_tol:
            # confirm against the true residual; restart from it on drift
            r = _project(b - A @ x)
            rel = math.sqrt(np.dot(r, r)) / bnorm
            history.append(rel)
            if rel <= opts.rel_tol:
                break
            z = _project(dinv * r) if dinv is not None else r
            rz = np.dot(r, z)
            p = z.copy()
            continue
        history.append(rel)
        z = _project(dinv * r) if dinv is not None else r
        rz_new = np.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    u = deflate(x, areas)
    true_rel = math.sqrt(np.sum((A @ u - b) ** 2)) / bnorm
    if true_rel > opts.rel_tol:
        raise ConvergenceError(
            f"CG did not reach relative residual {opts.rel_tol:.1e} in {it} iterations "
            f"(residual {true_rel:.3e})",
            history,
        )
    mean = float(np.dot(areas, u) / areas.sum())
    return u, SolveReport(it, true_rel, mean, history)
