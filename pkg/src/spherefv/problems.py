"""Analytic test problems for the Poisson equation on the unit sphere.

Fields take points of shape ``(..., 3)`` and are written in Cartesian form so
that they are smooth through the poles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TestProblem:
    """Exact solution ``u``, its tangential gradient and forcing ``f = -Lap_s u``."""

    __test__ = False  # not a pytest class

    name: str
    u: Field
    grad_u: Field
    f: Field

    def compatibility(self, grid, rule=None) -> float:
        """Numerical ``int f ds`` over the sphere; zero for a well-posed problem."""
        from .metrics import integrate

        return integrate(self.f, grid, rule)

    def mean(self, grid, rule=None) -> float:
        from .metrics import integrate

        return integrate(self.u, grid, rule)


def tangential(p, v):
    """Remove the component of ``v`` normal to the sphere at ``p``."""
    return v - np.einsum("...i,...i->...", v, p)[..., None] * p


def _heikes_u(p):
    p = np.asarray(p, dtype=float)
    x, y = p[..., 0], p[..., 1]
    rho = np.sqrt(x * x + y * y)  # cos(lat)
    return x * rho**3


def _heikes_grad(p):
    p = np.asarray(p, dtype=float)
    x, y = p[..., 0], p[..., 1]
    rho = np.sqrt(x * x + y * y)
    g = np.stack([rho**3 + 3.0 * x * x * rho, 3.0 * x * y * rho, np.zeros_like(x)], axis=-1)
    return tangential(p, g)


def _heikes_f(p):
    p = np.asarray(p, dtype=float)
    x, y = p[..., 0], p[..., 1]
    rho2 = x * x + y * y
    return 5.0 * x * np.sqrt(rho2) * (4.0 * rho2 - 3.0)


def heikes_problem() -> TestProblem:
    """``u = cos(lon) cos(lat)**4`` with ``f = 5 cos(lon) cos(lat)**2 (4 cos(lat)**2 - 3)``.

    In Cartesian form ``u = x rho**3`` and ``f = 5 x rho (4 rho**2 - 3)`` with
    ``rho = sqrt(x**2 + y**2)``.
    """
    return TestProblem("heikes", _heikes_u, _heikes_grad, _heikes_f)


def _zero(p):
    return np.zeros(np.shape(p)[:-1])


def _zero_vec(p):
    return np.zeros(np.shape(p))


def constant_problem() -> TestProblem:
    return TestProblem("constant", _zero, _zero_vec, _zero)


PROBLEMS = {
    "heikes": heikes_problem,
    "constant": constant_problem,
}


def get_problem(name: str) -> TestProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
