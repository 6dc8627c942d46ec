"""Compare the compiled and numpy grid kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--levels 3 4 5 6] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from spherefv import _kernels_py
from spherefv.grid import build_grid

try:
    from spherefv import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[3, 4, 5, 6])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; only the numpy backend is timed")
    print(f"{'kernel':<14}{'level':>6}{'N':>9}{'numpy ms':>11}{'cython ms':>11}{'speedup':>9}{'max diff':>11}")
    for level in args.levels:
        g = build_grid(level)
        a = (g.vertices, g.triangles, g.edges, g.edge_tris)
        for name in ("dual_measures", "lloyd_step"):
            py = getattr(_kernels_py, name)
            t_py = _time(lambda: py(*a), args.repeat) * 1e3
            row = f"{name:<14}{level:>6}{g.n_vertices:>9}{t_py:>11.2f}"
            if _ckernels is not None:
                cy = getattr(_ckernels, name)
                t_cy = _time(lambda: cy(*a), args.repeat) * 1e3
                diff = max(float(np.max(np.abs(np.asarray(p) - np.asarray(c))))
                           for p, c in zip(py(*a), cy(*a)))
                row += f"{t_cy:>11.2f}{t_py / t_cy:>9.1f}{diff:>11.1e}"
            print(row)


if __name__ == "__main__":
    main()
