import functools

import numpy as np
import pytest

from spherefv.grid import build_grid, build_voronoi_dual
from spherefv.scvt import build_scvt


@functools.lru_cache(maxsize=None)
def nopt(level):
    return build_grid(level)


@functools.lru_cache(maxsize=None)
def nopt_dual(level):
    return build_voronoi_dual(nopt(level))


@functools.lru_cache(maxsize=None)
def scvt_grid(level, max_iter=2000):
    g, _ = build_scvt(level, tol=1e-8, max_iter=max_iter)
    return g


def random_unit(rng, n):
    p = rng.normal(size=(n, 3))
    return p / np.linalg.norm(p, axis=1)[:, None]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
