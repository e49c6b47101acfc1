import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fittedbvp.errors import DomainError, MeshError
from fittedbvp.exprlang import evaluate
from fittedbvp.fitted_exp import (
    ExpAssembler, ExpSolution, assemble_exp_rows, assemble_exp_system, exp_coefficients, fitting_factor,
    reconstruct_exp, reconstruct_exp_derivative, solve_exp,
)
from fittedbvp.mesh import Mesh, uniform_mesh
from fittedbvp.oracle import LinearExpExact
from fittedbvp.problems import ExpLayerProblem
from fittedbvp.solver import SolveOptions

from cases import cubic_exp, linear_exp, march_exp_frozen, random_mesh


def test_fitting_factor_examples():
    assert fitting_factor(1e8, 1.0, 1.0) == pytest.approx(1.0, abs=1e-8)
    assert fitting_factor(1.0, 1.0, math.log(2)) == pytest.approx(0.5 / math.log(2), rel=1e-12)
    assert fitting_factor(1e-9, 1.0, 1e-3) == pytest.approx(1e-6, rel=1e-15)
    with pytest.raises(ValueError):
        fitting_factor(0.0, 1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-8, 1e8), st.floats(1.0001, 10.0))
def test_fitting_factor_decreasing_in_unit_interval(theta, ratio):
    s1 = fitting_factor(1.0, theta, 1.0)
    s2 = fitting_factor(1.0, theta * ratio, 1.0)
    assert 0.0 < s2 < s1 < 1.0 or (theta < 1e-7 and s1 == pytest.approx(1.0))


def test_small_theta_series_is_continuous():
    mesh = Mesh([0.0, 0.5, 1.0])
    for theta in (0.99e-3, 1.01e-3):
        c = exp_coefficients(1.0, mesh, [theta * 2] * 2, [0.0, 0.0])
        q_direct = c.theta / -np.expm1(-c.theta) - 1
        r_direct = 1 - c.theta * np.exp(-c.theta) / -np.expm1(-c.theta)
        np.testing.assert_allclose(c.q, q_direct, rtol=1e-9)
        np.testing.assert_allclose(c.r, r_direct, rtol=1e-9)


@pytest.mark.parametrize("eps", [1.0, 1e-4, 1e-8])
@pytest.mark.parametrize("seed", range(5))
def test_exact_on_frozen_problem(eps, seed):
    rng = np.random.default_rng(seed)
    N = 16
    mesh = Mesh(random_mesh(rng, 1.0, N))
    a = rng.uniform(0.5, 2.0, N)
    g = rng.uniform(-1.0, 1.0, N)
    K = 0.7
    V = march_exp_frozen(mesh, eps, a, g, V_N=0.3, K=K)
    sys = assemble_exp_rows(exp_coefficients(eps, mesh, a, g), V[0], V[-1] - K)
    assert sys.relative_residual(V) <= 1e-10


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_sign_structure(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 40))
    eps = 10.0 ** rng.uniform(-9, 0)
    mesh = Mesh(random_mesh(rng, 1.0, N))
    c = exp_coefficients(eps, mesh, rng.uniform(0.2, 3, N), rng.normal(size=N))
    s = assemble_exp_rows(c, 1.0, 0.0)
    lo, d, up = s.lower[1:N], s.diag[1:N], s.upper[1:N]
    assert np.all(lo >= 0) and np.all(up >= 0) and np.all(d < 0)
    np.testing.assert_allclose(lo + d + up, 0.0, atol=1e-12 * np.max(np.abs(d)))


def test_large_eps_limit_is_central_difference():
    mesh = uniform_mesh(1.0, 8)
    h = 1.0 / 8
    c = exp_coefficients(1e10, mesh, np.ones(8), np.zeros(8))
    s = assemble_exp_rows(c, 0.0, 0.0)
    np.testing.assert_allclose(s.lower[1:8], 1 / h, rtol=1e-8)
    np.testing.assert_allclose(s.upper[1:8], 1 / h, rtol=1e-8)
    np.testing.assert_allclose(s.diag[1:8], -2 / h, rtol=1e-8)


def test_exact_nodal_values_satisfy_linear_system():
    p = linear_exp(0.1)
    mesh = uniform_mesh(1.0, 8)
    exact = LinearExpExact(0.1, 1.0, 1.0, 0.0, 1.0, 1.0)
    V = exact(mesh.nodes)
    sys = assemble_exp_system(p, mesh, V)
    # the nodal data of the true solution are not a fixed point of the scheme,
    # but solving once must reproduce them to first order
    sol, _ = solve_exp(p, mesh)
    assert np.max(np.abs(sol.values - V)) < 0.05
    assert sys.relative_residual(sol.values) < 0.05


def test_lagged_and_tangent_share_fixed_point():
    p = cubic_exp(1e-2)
    mesh = uniform_mesh(1.0, 32)
    tangent, st_t = solve_exp(p, mesh, SolveOptions(tol=1e-13))
    assert st_t.converged
    lagged_sys = assemble_exp_system(p, mesh, tangent.values, linearization="lagged")
    assert lagged_sys.relative_residual(tangent.values) <= 1e-12


def test_constant_solution_reconstruction():
    p = ExpLayerProblem(0.01, "1", "0", "u - 2", 2.0, alpha=1, beta=0.1, gamma=0.5)
    mesh = uniform_mesh(1.0, 10)
    sol = reconstruct_exp(p, mesh, np.full(11, 2.0))
    assert np.all(sol.c2 == 0)
    x = np.linspace(0, 1, 101)
    np.testing.assert_array_equal(sol(x), 2.0)
    np.testing.assert_array_equal(reconstruct_exp_derivative(sol, x), 0.0)


def test_reconstruction_reproduces_nodes_and_tracks_exact():
    eps = 0.1
    p = linear_exp(eps)
    exact = LinearExpExact(eps, 1.0, 1.0, 0.0, 1.0, 1.0)
    errs = []
    for N in (32, 64):
        sol, _ = solve_exp(p, uniform_mesh(1.0, N))
        assert np.array_equal(sol(sol.nodes), sol.values)
        x = np.linspace(0, 1, 1000)
        errs.append(np.max(np.abs(sol(x) - exact(x))))
    assert errs[0] * 32 <= 1.0 and errs[1] < 0.6 * errs[0]


@pytest.mark.parametrize("eps", [1e-1, 1e-4, 1e-8])
def test_derivative_matching_and_boundary_row(eps):
    p = cubic_exp(eps)
    sol, stats = solve_exp(p, uniform_mesh(1.0, 64), SolveOptions(tol=1e-12))
    assert stats.converged
    # the interval data are frozen at the converged iterate, so the matching
    # holds for the reconstruction of the final values
    # V'(x_n-) contains (a/eps) * (difference of nodal values), so one ulp of
    # V turns into an absolute derivative error of order ulp * a/eps
    x = sol.nodes[1:-1]
    dmid = np.abs(sol.derivative(x))
    roundoff = 16 * np.finfo(float).eps * np.max(np.abs(sol.values)) / eps
    assert np.all(np.abs(sol.derivative_jump()) <= 1e-8 * (1 + dmid) + roundoff)
    robin = eps * sol.derivative(1.0) + evaluate(p.f_boundary, {"u": sol.values[-1]})
    assert abs(robin) <= 1e-10


def test_no_overflow_at_tiny_eps():
    sol, stats = solve_exp(linear_exp(1e-12), uniform_mesh(1.0, 1024))
    assert stats.converged and np.all(np.isfinite(sol.values))
    assert np.all(np.isfinite(sol(np.linspace(0, 1, 2001))))


def test_as_printed_signs_differs_when_g_nonzero_at_solution():
    p = linear_exp(1e-2, c=1.0)
    mesh = uniform_mesh(1.0, 64)
    good, _ = solve_exp(p, mesh)
    bad, _ = solve_exp(p, mesh, as_printed_signs=True)
    exact = LinearExpExact(1e-2, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert np.max(np.abs(good.values - exact(mesh.nodes))) < 0.02
    assert np.max(np.abs(bad.values - exact(mesh.nodes))) > 0.3


def test_mesh_length_must_match():
    with pytest.raises(MeshError):
        ExpAssembler(linear_exp(0.1), uniform_mesh(2.0, 4))


def test_non_positive_convection_rejected():
    p = ExpLayerProblem(0.1, "1 - 2*x", "u", "u - 1", 1.0, alpha=1, beta=0.1, gamma=0.5)
    with pytest.raises(DomainError):
        solve_exp(p, uniform_mesh(1.0, 8))


def test_iterate_length_checked():
    with pytest.raises(ValueError):
        ExpAssembler(linear_exp(0.1), uniform_mesh(1.0, 4))(np.zeros(3))


def test_solution_outside_domain():
    sol, _ = solve_exp(linear_exp(0.1), uniform_mesh(1.0, 4))
    assert isinstance(sol, ExpSolution)
    with pytest.raises(DomainError):
        sol(1.5)
