"""Command line interface: ``spherefv {grid,solve,study}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys

from . import scvt
from .geometry import GeometryError
from .grid import (GridError, GridFormatError, build_voronoi_dual, check_uniformity, format_grid,
                   read_grid)
from .problems import PROBLEMS, get_problem
from .quadrature import QuadratureRule
from .solver import SolveOptions, SolverError
from .study import (CSV_HEADER, GRID_KINDS, MAX_LEVEL, StudyConfig, StudyRow, build_grid_of_kind,
                    format_csv, format_field, run_study, solve_on_grid)

logger = logging.getLogger("spherefv")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def _levels(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--kind", choices=GRID_KINDS, default="nopt")
    p.add_argument("--scvt-tol", type=float, default=scvt.DEFAULT_TOL)
    p.add_argument("--scvt-max-iter", type=int, default=scvt.DEFAULT_MAX_ITER)


def _add_solve_opts(p: argparse.ArgumentParser):
    p.add_argument("--problem", choices=sorted(PROBLEMS), default="heikes")
    p.add_argument("--quad-depth", type=int, default=2)
    p.add_argument("--cg-tol", type=float, default=1e-10)
    p.add_argument("--cg-max-iter", type=int, default=None)
    p.add_argument("--jacobi", action="store_true", help="diagonal preconditioner for CG")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherefv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    # accepted after the subcommand too; SUPPRESS keeps it from resetting the global flag
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                         help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", parents=[verbose], help="write an SVDGRID file")
    g.add_argument("--level", type=int, default=None)
    g.add_argument("--input", help="start from an existing SVDGRID file instead of --level")
    _add_common(g)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", parents=[verbose], help="solve on one grid and print its error row")
    s.add_argument("--level", type=int, default=None)
    s.add_argument("--grid", help="SVDGRID file to solve on instead of --level/--kind")
    _add_common(s)
    _add_solve_opts(s)
    s.add_argument("--out", help="optional CSV dump of the nodal solution")

    st = sub.add_parser("study", parents=[verbose], help="multi-level convergence study to CSV")
    st.add_argument("--levels", type=_levels, default=(0, 6))
    _add_common(st)
    _add_solve_opts(st)
    st.add_argument("--out", help="CSV path (stdout when omitted)")
    return parser


def _solver_opts(args) -> SolveOptions:
    return SolveOptions(rel_tol=args.cg_tol, max_iter=args.cg_max_iter,
                        preconditioner="jacobi" if args.jacobi else None)


def _check_level(level):
    if level is None or not 0 <= level <= MAX_LEVEL:
        raise ConfigError(f"--level must be between 0 and {MAX_LEVEL}")


def cmd_grid(args) -> int:
    if args.input:
        g = read_grid(args.input)
        if args.kind == "scvt":
            g, rep = scvt.lloyd_optimize(g, args.scvt_tol, args.scvt_max_iter)
            logger.info("lloyd: %d iterations, max move %.3e", rep.iterations, rep.final_max_move)
    else:
        _check_level(args.level)
        if args.scvt_max_iter < 0 or not args.scvt_tol > 0:
            raise ConfigError("--scvt-tol must be positive and --scvt-max-iter nonnegative")
        g = build_grid_of_kind(args.kind, args.level, args.scvt_tol, args.scvt_max_iter)
    dual = build_voronoi_dual(g)
    uni = check_uniformity(dual)
    text = format_grid(g)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(f"N={g.n_vertices} F={g.n_triangles} h={uni.h:.10g} C0={uni.c0:.10g} C1={uni.c1:.10g}")
    return 0


def cmd_solve(args) -> int:
    problem = get_problem(args.problem)
    opts = _solver_opts(args)
    if args.quad_depth < 0:
        raise ConfigError("--quad-depth must be nonnegative")
    rule = QuadratureRule(args.quad_depth, "degree5")
    if args.grid:
        g = read_grid(args.grid)
    else:
        _check_level(args.level)
        g = build_grid_of_kind(args.kind, args.level, args.scvt_tol, args.scvt_max_iter)
    u, err, srep, dual = solve_on_grid(g, problem, rule, opts)
    logger.info("cg: %d iterations, relative residual %.3e", srep.iterations, srep.final_relative_residual)
    print(CSV_HEADER)
    print(StudyRow(g.level, g.n_vertices, dual.h, err).csv())
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_field(g, u, problem.u(g.vertices)))
    return 0


def cmd_study(args) -> int:
    lo, hi = args.levels
    cfg = StudyConfig(grid_kind=args.kind, level_min=lo, level_max=hi, problem=args.problem,
                      solver=_solver_opts(args), quad_depth=args.quad_depth,
                      scvt_tol=args.scvt_tol, scvt_max_iter=args.scvt_max_iter, out=args.out)
    text = format_csv(run_study(cfg))
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"grid": cmd_grid, "solve": cmd_solve, "study": cmd_study}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except GridFormatError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except (GridError, GeometryError, SolverError) as exc:
        tag = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error [{tag}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
