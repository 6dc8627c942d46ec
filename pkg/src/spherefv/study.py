"""Multi-level convergence studies."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from . import scvt
from .discretization import assemble
from .grid import DelaunayGrid, build_icosahedron, build_voronoi_dual, refine
from .metrics import ErrorReport, norms
from .problems import TestProblem, get_problem
from .quadrature import QuadratureRule
from .solver import SolveOptions, SolveReport, solve

logger = logging.getLogger(__name__)

MAX_LEVEL = 8
GRID_KINDS = ("nopt", "scvt")
CSV_HEADER = "level,N,h,err_L2,CR_L2,err_H1,CR_H1,err_max,CR_max,err_W1inf,CR_W1inf"


@dataclass
class StudyConfig:
    grid_kind: str = "nopt"
    level_min: int = 0
    level_max: int = 6
    problem: str = "heikes"
    solver: SolveOptions = field(default_factory=SolveOptions)
    quad_depth: int = 2
    scvt_tol: float = scvt.DEFAULT_TOL
    scvt_max_iter: int = scvt.DEFAULT_MAX_ITER
    out: str | None = None

    def __post_init__(self):
        if self.grid_kind not in GRID_KINDS:
            raise ValueError(f"grid kind must be one of {GRID_KINDS}, got {self.grid_kind!r}")
        if not 0 <= self.level_min <= self.level_max <= MAX_LEVEL:
            raise ValueError(f"levels must satisfy 0 <= min <= max <= {MAX_LEVEL}")
        if self.quad_depth < 0:
            raise ValueError("quadrature depth must be nonnegative")
        if not self.scvt_tol > 0:
            raise ValueError("scvt tolerance must be positive")
        if self.scvt_max_iter < 0:
            raise ValueError("scvt iteration budget must be nonnegative")
        get_problem(self.problem)

    @property
    def rule(self) -> QuadratureRule:
        return QuadratureRule(self.quad_depth, "degree5")


@dataclass
class StudyRow:
    level: int
    n: int
    h: float
    errors: ErrorReport

    def csv(self) -> str:
        cells = [str(self.level), str(self.n), _fmt(self.h)]
        for k in ErrorReport.NORMS:
            cells.append(_fmt(getattr(self.errors, f"err_{k}")))
            cells.append(_fmt(getattr(self.errors, f"cr_{k}")))
        return ",".join(cells)


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".10g")


def grid_levels(kind: str, level_min: int, level_max: int, tol: float = scvt.DEFAULT_TOL,
                max_iter: int = scvt.DEFAULT_MAX_ITER):
    """Yield ``(level, grid)`` for each requested level, refining as it goes."""
    g = build_icosahedron()
    for level in range(level_max + 1):
        if level > 0:
            g = refine(g)
        if kind == "scvt":
            g, rep = scvt.lloyd_optimize(g, tol, max_iter)
            if not rep.converged and max_iter > 0:
                logger.warning("lloyd at level %d stopped after %d iterations (max move %.2e)",
                               level, rep.iterations, rep.final_max_move)
        if level >= level_min:
            yield level, g


def build_grid_of_kind(kind: str, level: int, tol: float = scvt.DEFAULT_TOL,
                       max_iter: int = scvt.DEFAULT_MAX_ITER) -> DelaunayGrid:
    for _, g in grid_levels(kind, level, level, tol, max_iter):
        return g
    raise AssertionError("unreachable")


def solve_on_grid(g: DelaunayGrid, problem: TestProblem, rule: QuadratureRule,
                  opts: SolveOptions | None = None):
    """Assemble, solve and measure errors on one grid.

    Returns ``(u_h, ErrorReport, SolveReport, dual)``.
    """
    dual = build_voronoi_dual(g)
    system = assemble(dual, problem.f, rule)
    u, srep = solve(system, opts)
    err = norms(problem.u, problem.grad_u, u, g, rule)
    return u, err, srep, dual


def run_study(cfg: StudyConfig) -> list[StudyRow]:
    problem = get_problem(cfg.problem)
    rows: list[StudyRow] = []
    prev = None
    for level, g in grid_levels(cfg.grid_kind, cfg.level_min, cfg.level_max,
                                cfg.scvt_tol, cfg.scvt_max_iter):
        _, err, srep, dual = solve_on_grid(g, problem, cfg.rule, cfg.solver)
        if prev is not None:
            err = err.with_rates_from(prev)
        prev = err
        logger.info("level %d: N=%d cg=%d err_L2=%.3e", level, g.n_vertices, srep.iterations, err.err_L2)
        rows.append(StudyRow(level, g.n_vertices, dual.h, err))
    return rows


def format_csv(rows: list[StudyRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(r.csv() + "\n")
    return buf.getvalue()


def format_field(g: DelaunayGrid, u_h, u_exact) -> str:
    buf = io.StringIO()
    buf.write("i,x1,x2,x3,u_h,u_exact\n")
    for i, (p, a, b) in enumerate(zip(g.vertices, np.asarray(u_h), np.asarray(u_exact))):
        buf.write(f"{i},{p[0]:.17g},{p[1]:.17g},{p[2]:.17g},{a:.17g},{b:.17g}\n")
    return buf.getvalue()
