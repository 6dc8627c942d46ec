import numpy as np
import pytest

from conftest import nopt_dual
from spherefv.discretization import apply_operator, assemble
from spherefv.problems import constant_problem, heikes_problem
from spherefv.solver import (ConvergenceError, IncompatibleSource, SolveOptions, deflate, solve)


def _system(level, f=None):
    return assemble(nopt_dual(level), heikes_problem().f if f is None else f)


def _dense_oracle(s):
    """Minimum-norm least-squares solution, shifted to zero area-weighted mean."""
    a = s.matrix.toarray()
    u = np.linalg.pinv(a, rcond=1e-12, hermitian=True) @ s.rhs
    return deflate(u, s.cell_areas)


class TestSolve:
    def test_zero_rhs(self):
        s = assemble(nopt_dual(2))
        u, rep = solve(s)
        assert np.all(u == 0) and rep.iterations == 0

    @pytest.mark.parametrize("level", [0, 1])
    def test_dense_oracle(self, level):
        s = _system(level)
        u, rep = solve(s)
        assert np.max(np.abs(u - _dense_oracle(s))) < 1e-9
        assert rep.final_relative_residual <= 1e-10

    @pytest.mark.parametrize("level", [0, 1])
    def test_error_energy_norm_non_increasing(self, level):
        s = _system(level)
        a = s.matrix.toarray()
        exact = _dense_oracle(s)
        errs = []

        def record(x):
            e = deflate(x, s.cell_areas) - exact
            errs.append(e @ a @ e)

        solve(s, SolveOptions(rel_tol=1e-12), callback=record)
        assert errs and errs[-1] < 1e-18 * max(1.0, errs[0])
        assert np.all(np.diff(errs) <= 1e-14 * errs[0])

    @pytest.mark.parametrize("level", [2, 4])
    def test_post_conditions(self, level):
        s = _system(level)
        u, rep = solve(s)
        assert np.linalg.norm(s.matrix @ u - s.rhs) <= 1e-10 * np.linalg.norm(s.rhs)
        assert abs(rep.mean_of_solution) < 1e-12 * np.abs(u).max()
        assert rep.iterations <= SolveOptions().iteration_limit(s.size)
        assert rep.history[0] == 1.0

    def test_deterministic(self):
        s = _system(4)
        u1, _ = solve(s)
        u2, _ = solve(s)
        assert np.array_equal(u1, u2)

    def test_jacobi_agrees(self):
        s = _system(3)
        u1, _ = solve(s)
        u2, _ = solve(s, SolveOptions(preconditioner="jacobi"))
        assert np.max(np.abs(u1 - u2)) < 1e-8

    def test_constant_shift_of_rhs(self):
        s = _system(3)
        u1, _ = solve(s)
        s.rhs = deflate(s.rhs + 5.0, np.ones(s.size))
        u2, _ = solve(s)
        assert np.max(np.abs(u1 - u2)) < 1e-9

    def test_incompatible_source(self):
        s = _system(2)
        s.rhs = s.rhs + 1.0
        with pytest.raises(IncompatibleSource, match="incompatible source"):
            solve(s)

    def test_non_convergence_carries_history(self):
        s = _system(4)
        with pytest.raises(ConvergenceError) as info:
            solve(s, SolveOptions(max_iter=3))
        assert len(info.value.history) >= 3

    def test_constant_problem(self):
        s = assemble(nopt_dual(3), constant_problem().f)
        u, _ = solve(s)
        assert np.abs(u).max() < 1e-10

    def test_scheme_residual(self):
        d = nopt_dual(3)
        s = _system(3)
        u, _ = solve(s)
        assert np.abs(apply_operator(s, u)).max() <= 1e-10 * np.linalg.norm(s.rhs) / d.cell_areas.min()


class TestOptions:
    @pytest.mark.parametrize("kw", [dict(rel_tol=0.0), dict(rel_tol=1.0), dict(max_iter=0),
                                    dict(guard=0), dict(preconditioner="ilu")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolveOptions(**kw)

    def test_default_limit(self):
        assert SolveOptions().iteration_limit(40962) == 2024
        assert SolveOptions(max_iter=7).iteration_limit(40962) == 7


class TestDeflate:
    def test_constant(self, rng):
        a = rng.random(20) + 0.1
        assert np.allclose(deflate(np.full(20, 3.0), a), 0.0, atol=1e-15)

    def test_idempotent(self, rng):
        a = rng.random(50) + 0.1
        v = deflate(rng.normal(size=50), a)
        assert np.max(np.abs(deflate(v, a) - v)) < 1e-15

    def test_weighted_mean_zero(self, rng):
        a = rng.random(50) + 0.1
        v = deflate(rng.normal(size=50), a)
        assert abs(a @ v) < 1e-14

    def test_errors(self):
        with pytest.raises(ValueError):
            deflate(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            deflate(np.ones(3), np.zeros(3))
