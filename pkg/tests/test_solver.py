import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fittedbvp.errors import NonFiniteError, SingularSystemError
from fittedbvp.fitted_exp import ExpAssembler
from fittedbvp.mesh import uniform_mesh
from fittedbvp.solver import SolveOptions, TridiagonalSystem, picard_solve, sweep

from cases import cubic_exp, linear_exp


def random_dominant(rng, n):
    lower = rng.uniform(-1, 1, n)
    upper = rng.uniform(-1, 1, n)
    diag = (np.abs(lower) + np.abs(upper) + rng.uniform(0.1, 2.0, n)) * rng.choice([-1, 1], n)
    return TridiagonalSystem(lower, diag, upper, rng.normal(size=n))


def test_identity():
    s = TridiagonalSystem(np.zeros(3), np.ones(3), np.zeros(3), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(sweep(s), [1, 2, 3])


def test_zero_rhs():
    rng = np.random.default_rng(0)
    s = random_dominant(rng, 10)
    s0 = TridiagonalSystem(s.lower, s.diag, s.upper, np.zeros(10))
    np.testing.assert_array_equal(sweep(s0), np.zeros(10))


def test_matches_dense_solve_on_random_systems():
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(200):
        s = random_dominant(rng, int(rng.integers(3, 51)))
        x = sweep(s)
        ref = np.linalg.solve(s.to_dense(), s.rhs)
        worst = max(worst, np.max(np.abs(x - ref)) / np.max(np.abs(ref)))
    assert worst <= 1e-11


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 60), st.integers(0, 2**32 - 1))
def test_sweep_residual_property(n, seed):
    s = random_dominant(np.random.default_rng(seed), n)
    assert s.relative_residual(sweep(s)) <= 1e-14


def test_matvec_agrees_with_dense():
    s = random_dominant(np.random.default_rng(3), 7)
    v = np.arange(7.0)
    np.testing.assert_allclose(s.matvec(v), s.to_dense() @ v, rtol=1e-15)


def test_ignored_corner_entries():
    s = TridiagonalSystem(np.ones(3), np.full(3, 4.0), np.ones(3), np.ones(3))
    assert s.lower[0] == 0 and s.upper[-1] == 0


def test_singular_pivot_reports_row():
    s = TridiagonalSystem(np.array([0, 1.0, 0]), np.array([1.0, 1.0, 1.0]), np.array([1.0, 0, 0]), np.ones(3))
    with pytest.raises(SingularSystemError) as info:
        sweep(s)
    assert info.value.row == 1


def test_non_finite_entries_rejected():
    with pytest.raises(NonFiniteError):
        TridiagonalSystem(np.zeros(2), np.array([1.0, np.nan]), np.zeros(2), np.zeros(2))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        TridiagonalSystem(np.zeros(2), np.ones(3), np.zeros(3), np.zeros(3))


@pytest.mark.parametrize("kwargs", [dict(tol=0), dict(max_iter=0), dict(damping=0), dict(damping=1.5)])
def test_options_validate(kwargs):
    with pytest.raises(ValueError):
        SolveOptions(**kwargs)


def test_linear_problem_converges_in_two_iterations():
    p = linear_exp(0.1)
    mesh = uniform_mesh(1.0, 32)
    V, stats = picard_solve(ExpAssembler(p, mesh), np.full(33, 1.0))
    assert stats.converged and stats.iterations <= 2
    assert stats.final_update_norm <= 1e-12


def test_cubic_instance_converges():
    p = cubic_exp(1e-4)
    mesh = uniform_mesh(1.0, 128)
    V, stats = picard_solve(ExpAssembler(p, mesh), np.full(129, 1.0), SolveOptions(tol=1e-10, max_iter=50))
    assert stats.converged
    assert stats.iterations == 5
    assert stats.final_residual_norm <= 1e-12


def test_max_iter_one_returns_best_iterate():
    p = cubic_exp(1e-2)
    mesh = uniform_mesh(1.0, 16)
    V, stats = picard_solve(ExpAssembler(p, mesh), np.full(17, 1.0), SolveOptions(max_iter=1))
    assert not stats.converged and stats.iterations == 1
    assert np.all(np.isfinite(V))


def test_fixed_point_property_and_determinism():
    p = cubic_exp(1e-3)
    mesh = uniform_mesh(1.0, 64)
    asm = ExpAssembler(p, mesh)
    opts = SolveOptions(tol=1e-12)
    V, stats = picard_solve(asm, np.full(65, 1.0), opts)
    again = sweep(asm(V))
    assert np.max(np.abs(again - V)) <= opts.tol * (1 + np.max(np.abs(V)))
    V2, _ = picard_solve(asm, np.full(65, 1.0), opts)
    assert np.array_equal(V, V2)


def test_damping_still_converges():
    p = cubic_exp(1e-3)
    mesh = uniform_mesh(1.0, 64)
    V, stats = picard_solve(ExpAssembler(p, mesh), np.full(65, 1.0), SolveOptions(damping=0.5, max_iter=200))
    assert stats.converged
    V1, _ = picard_solve(ExpAssembler(p, mesh), np.full(65, 1.0))
    np.testing.assert_allclose(V, V1, atol=1e-8)


def test_non_finite_initial():
    p = linear_exp(0.1)
    mesh = uniform_mesh(1.0, 4)
    with pytest.raises(NonFiniteError):
        picard_solve(ExpAssembler(p, mesh), np.array([1.0, np.inf, 0, 0, 0]))
