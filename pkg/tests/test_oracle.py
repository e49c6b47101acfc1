import math

import numpy as np
import pytest

from fittedbvp.fitted_exp import solve_exp
from fittedbvp.fitted_pow import solve_pow
from fittedbvp.mesh import power_layer_mesh, uniform_mesh
from fittedbvp.oracle import (
    BoundCheckReport, LinearExpExact, LinearPowExact, SingularOracleError, check_derivative_bound_exp,
    check_derivative_bound_pow, check_solution_bound_pow, classical_central_scheme, closed_form_for,
    constants_stable, exact_linear_exp, exact_linear_pow, fine_mesh_reference,
)
from fittedbvp.problems import ExpLayerProblem, PowLayerProblem

from cases import cubic_exp, golden_pow, linear_exp


def test_characteristic_roots():
    e = LinearExpExact(0.25, 1.0, 1.0, 0.0, 1.0, 1.0)
    assert e.lp == pytest.approx(4.8284271, abs=1e-7)
    assert e.lm == pytest.approx(-0.8284271, abs=1e-7)


def test_constant_solution():
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(exact_linear_exp(0.01, 1.0, 2.0, 3.0, -1.5, -1.5, 1.0, x), -1.5, atol=1e-15)


@pytest.mark.parametrize("eps,b,c", [(0.25, 1.0, 0.0), (1e-3, 0.5, 1.0), (1e-6, 0.0, 2.0), (1.0, -0.1, 0.3)])
def test_exp_closed_form_residual(eps, b, c):
    e = LinearExpExact(eps, 1.0, b, c, 1.0, 1.0, 1.0)
    x = np.linspace(0, 1, 100)
    terms = [eps * e.second_derivative(x), e.derivative(x), b * e(x), np.full_like(x, c)]
    res = -terms[0] + terms[1] + terms[2] + terms[3]
    scale = sum(np.abs(t) for t in terms) + 1
    assert np.max(np.abs(res) / scale) <= 1e-9
    assert e(0.0) == pytest.approx(1.0, abs=1e-12)
    assert eps * e.derivative(1.0) + e(1.0) - 1.0 == pytest.approx(0.0, abs=1e-9)


def test_singular_exp_oracle():
    with pytest.raises(SingularOracleError):
        LinearExpExact(1.0, 1.0, -1.0, 0.0, 1.0, 1.0)


def test_pow_single_mode():
    eps = 1e-3
    phi = (1 + math.sqrt(5)) / 2
    x = np.linspace(0, 1, 50)
    u = exact_linear_pow(eps, eps**phi, (1 + eps) ** phi, x)
    np.testing.assert_allclose(u, (eps + x) ** phi, rtol=1e-12)


def test_pow_zero_data():
    np.testing.assert_array_equal(exact_linear_pow(0.1, 0.0, 0.0, np.linspace(0, 1, 5)), 0.0)


@pytest.mark.parametrize("eps,k", [(1.0, 1.0), (1e-4, 1.0), (1e-8, 2.0)])
def test_pow_closed_form_residual(eps, k):
    e = LinearPowExact(eps, 1.0, 2.0, k)
    x = np.linspace(0, 1, 100)
    lhs = (eps + x) ** 2 * e.second_derivative(x)
    rhs = k * e(x)
    assert np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1)) <= 1e-9


def test_closed_form_detection():
    assert closed_form_for(linear_exp(0.1)) is not None
    assert closed_form_for(linear_exp(0.1, c=2.0)) is not None
    assert closed_form_for(cubic_exp(0.1)) is None
    assert closed_form_for(golden_pow(0.1)) is not None
    assert closed_form_for(PowLayerProblem(0.1, "u - sin(x)", 0, 0)) is None
    assert closed_form_for(ExpLayerProblem(0.1, "1+x", "u", "u-1", 1.0)) is None


def test_classical_matches_fitted_without_layer():
    p = linear_exp(1.0)
    mesh = uniform_mesh(1.0, 64)
    exact = closed_form_for(p)
    fitted, _ = solve_exp(p, mesh)
    classical, stats = classical_central_scheme(p, mesh)
    assert stats.converged
    e_f = np.max(np.abs(fitted.values - exact(mesh.nodes)))
    e_c = np.max(np.abs(classical.values - exact(mesh.nodes)))
    # central differences are second order here, so only the upper bound is meaningful
    assert e_c <= 4 * e_f


def test_classical_fails_in_layer():
    p = linear_exp(1e-6)
    mesh = uniform_mesh(1.0, 100)
    exact = closed_form_for(p)
    fitted, _ = solve_exp(p, mesh)
    classical, _ = classical_central_scheme(p, mesh)
    e_f = np.max(np.abs(fitted.values - exact(mesh.nodes)))
    e_c = np.max(np.abs(classical.values - exact(mesh.nodes)))
    assert e_c >= 10 * e_f


def test_classical_zero_source_power():
    p = PowLayerProblem(0.01, "0", 1.0, 3.0)
    mesh = power_layer_mesh(0.01, 16)
    sol, _ = classical_central_scheme(p, mesh)
    np.testing.assert_allclose(sol.values, 1 + 2 * mesh.nodes, rtol=1e-13)


@pytest.mark.parametrize("problem", [linear_exp(1e-3), golden_pow(1e-3)], ids=["exp", "pow"])
def test_cross_oracle_agreement(problem):
    n_ref = 2**14
    ref = fine_mesh_reference(problem, n_ref)
    exact = closed_form_for(problem)
    assert np.max(np.abs(ref.values - exact(ref.nodes))) <= 10 / n_ref


def test_reference_size_rule():
    with pytest.raises(ValueError):
        fine_mesh_reference(linear_exp(0.1), 512, production_N=128)


def test_reference_doubling_is_stable():
    p = cubic_exp(1e-4)
    mesh = uniform_mesh(1.0, 128)
    sol, _ = solve_exp(p, mesh)
    e14 = np.max(np.abs(sol.values - fine_mesh_reference(p, 2**14)(mesh.nodes)))
    e15 = np.max(np.abs(sol.values - fine_mesh_reference(p, 2**15)(mesh.nodes)))
    assert abs(e14 - e15) < 0.05 * e15


def test_cubic_reference_monotone_in_layer():
    eps = 1e-4
    ref = fine_mesh_reference(cubic_exp(eps), 2**14)
    assert np.all(np.isfinite(ref.values))
    # the outer solution decays while the layer climbs to meet the Robin data;
    # within a few layer widths of x = L the layer term dominates
    layer = ref.values[ref.nodes >= 1 - 5 * eps]
    d = np.diff(layer)
    assert np.all(d >= 0) or np.all(d <= 0)


def test_derivative_bound_constants_exp():
    reports = []
    for eps in (1.0, 1e-4, 1e-8):
        p = linear_exp(eps)
        sol, _ = solve_exp(p, uniform_mesh(1.0, 256))
        r = check_derivative_bound_exp(sol, p)
        assert r.sample_count == 1000 and r.held
        reports.append(r)
    assert constants_stable(reports)


def test_derivative_bound_constants_pow():
    reports = []
    for eps in (1.0, 1e-4, 1e-8):
        p = golden_pow(eps)
        sol, _ = solve_pow(p, power_layer_mesh(eps, 256))
        reports.append(check_derivative_bound_pow(sol, p))
    assert constants_stable(reports)
    explicit = check_derivative_bound_pow(sol, p, constant=reports[-1].inferred_constant * 2)
    assert explicit.held


@pytest.mark.parametrize("f", ["u - 1", "u - sin(x)"])
@pytest.mark.parametrize("eps", [1e-2, 1e-6])
def test_solution_bound_pow(f, eps):
    p = PowLayerProblem(eps, f, 0.0, 0.0, 1.0)
    sol, _ = solve_pow(p, power_layer_mesh(eps, 128))
    r = check_solution_bound_pow(sol, p)
    assert r.held and 0 < r.inferred_constant <= 1.0


def test_solution_bound_requires_zero_data():
    p = golden_pow(0.1)
    sol, _ = solve_pow(p, power_layer_mesh(0.1, 8))
    with pytest.raises(ValueError):
        check_solution_bound_pow(sol, p)


def test_constants_stable_edge_cases():
    mk = lambda c: BoundCheckReport("b", 0.0, 1, c)
    assert constants_stable([mk(0.0), mk(0.0)])
    assert not constants_stable([mk(0.0), mk(1.0)])
    assert not constants_stable([mk(1.0), mk(3.5)])
    assert constants_stable([mk(1.0), mk(2.9)])


def test_bound_checks_on_trivial_solutions():
    p = ExpLayerProblem(0.01, "1", "0", "u - 2", 2.0)
    sol, _ = solve_exp(p, uniform_mesh(1.0, 16))
    assert check_derivative_bound_exp(sol, p).inferred_constant <= 1e-12
    zero = PowLayerProblem(0.01, "u", 0.0, 0.0)
    sol, _ = solve_pow(zero, power_layer_mesh(0.01, 16))
    assert check_derivative_bound_pow(sol, zero).inferred_constant == 0.0
    line = PowLayerProblem(0.01, "0", 1.0, 3.0)
    sol, _ = solve_pow(line, power_layer_mesh(0.01, 16))
    assert check_derivative_bound_pow(sol, line).inferred_constant <= 2.0 * 1.01 + 1e-12
