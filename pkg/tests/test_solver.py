import numpy as np
import pytest

from heisenmix.core.errors import DomainError
from heisenmix.core.fields import Grid
from heisenmix.core.fracsublap import OperatorParams
from heisenmix.core.functions import parse_function
from heisenmix.core.hcalculus import linear_combination
from heisenmix.core.hgroup import GaugeBall, GroupPoint
from heisenmix.core.mixedop import GridOperator
from heisenmix.core.solver import (
    DirichletProblem,
    _initial_guess,
    check_viscosity_inequality,
    damping_bound,
    solve_dirichlet,
)


ZERO = parse_function("const:0")


@pytest.fixture
def grid(unit_ball):
    return Grid.covering(unit_ball, 0.5)


def problem(unit_ball, params, g, f=ZERO):
    return DirichletProblem(unit_ball, f, g, params)


@pytest.mark.parametrize("method", ["policy", "richardson"])
def test_constant_exterior_data_is_solved_immediately(unit_ball, grid, params, coarse_spec, method):
    prob = problem(unit_ball, params, parse_function("const:7"))
    u, report = solve_dirichlet(prob, grid, tol=1e-3, spec=coarse_spec, method=method)
    assert report.converged
    assert report.iterations == 0
    assert report.method == method
    np.testing.assert_allclose(u.values_on_nodes, 7.0, atol=1e-12)
    assert u.meta['g'] == 'const:7'


def test_policy_solution_has_small_residual(unit_ball, grid, params, coarse_spec):
    prob = problem(unit_ball, params, parse_function("tanh_x:2"))
    u, report = solve_dirichlet(prob, grid, tol=1e-6, max_iter=50, spec=coarse_spec, method='policy')
    assert report.converged and report.status == 'ok'
    assert report.residual < 1e-6
    assert report.history[-1] == report.residual
    for side in ('sub', 'super'):
        violation = check_viscosity_inequality(u, ZERO, params, coarse_spec, side=side)
        assert violation.worst <= 1e-4
        assert violation.nodes == grid.interior.size


def test_adding_a_constant_to_the_data_shifts_the_solution(unit_ball, grid, params, coarse_spec):
    g = parse_function("tanh_x:1")
    shifted = linear_combination([(1.0, g), (1.0, parse_function("const:0.5"))])
    u1, _ = solve_dirichlet(problem(unit_ball, params, g), grid, tol=1e-7, max_iter=50, spec=coarse_spec, method='policy')
    u2, _ = solve_dirichlet(problem(unit_ball, params, shifted), grid, tol=1e-7, max_iter=50, spec=coarse_spec, method='policy')
    np.testing.assert_allclose(u2.values_on_nodes - u1.values_on_nodes, 0.5, atol=1e-5)


def test_ordered_data_give_ordered_solutions(unit_ball, grid, params, coarse_spec):
    tol = 1e-6
    g1 = parse_function("tanh_x:1")
    g2 = linear_combination([(1.0, g1), (0.3, parse_function("bump:1"))])
    u1, _ = solve_dirichlet(problem(unit_ball, params, g1), grid, tol=tol, max_iter=50, spec=coarse_spec, method='policy')
    u2, _ = solve_dirichlet(problem(unit_ball, params, g2), grid, tol=tol, max_iter=50, spec=coarse_spec, method='policy')
    interior = grid.interior
    assert np.all(u1.values_on_nodes[interior] <= u2.values_on_nodes[interior] + 2 * tol)


def test_solution_stays_within_the_range_of_the_exterior_data(unit_ball, grid, params, coarse_spec):
    tol = 1e-6
    u, _ = solve_dirichlet(problem(unit_ball, params, parse_function("tanh_x:2")), grid, tol=tol,
                           max_iter=50, spec=coarse_spec, method='policy')
    exterior = u.values_on_nodes[~grid.interior_mask]
    assert u.interior_values.max() <= exterior.max() + tol
    assert u.interior_values.min() >= exterior.min() - tol


def test_richardson_agrees_with_policy(unit_ball, grid, params, coarse_spec):
    prob = problem(unit_ball, params, parse_function("tanh_x:1"))
    ticks = []
    slow, slow_report = solve_dirichlet(prob, grid, tol=1e-6, max_iter=20000, spec=coarse_spec,
                                        method='richardson', progress=lambda k, r: ticks.append(k))
    fast, _ = solve_dirichlet(prob, grid, tol=1e-7, max_iter=50, spec=coarse_spec, method='policy')
    assert slow_report.converged
    assert ticks and ticks[0] == 0
    np.testing.assert_allclose(slow.values_on_nodes, fast.values_on_nodes, atol=1e-4)


def test_initial_guess_fills_omega_with_the_rim_average(unit_ball, grid, params, coarse_spec):
    g = parse_function("tanh_x:1")
    op = GridOperator(grid, g, params, coarse_spec)
    guess = _initial_guess(op)
    rim_mean = float(np.mean(g.values(grid.nodes[op.rim_ids])))
    np.testing.assert_allclose(guess[grid.interior], rim_mean, rtol=1e-12)
    outside = ~grid.interior_mask
    np.testing.assert_array_equal(guess[outside], g.values(grid.nodes)[outside])


def test_hitting_max_iter_is_reported_not_raised(unit_ball, grid, params, coarse_spec):
    prob = problem(unit_ball, params, parse_function("tanh_x:2"))
    _, report = solve_dirichlet(prob, grid, tol=1e-12, max_iter=2, spec=coarse_spec, method='richardson')
    assert not report.converged
    assert report.status == 'max_iter'
    assert report.iterations == 2
    assert len(report.history) == 3


def test_threads_do_not_change_the_solution(unit_ball, grid, params, coarse_spec):
    prob = problem(unit_ball, params, parse_function("tanh_x:1"))
    one, _ = solve_dirichlet(prob, grid, tol=1e-6, max_iter=50, spec=coarse_spec, method='policy', threads=1)
    many, _ = solve_dirichlet(prob, grid, tol=1e-6, max_iter=50, spec=coarse_spec, method='policy', threads=4)
    np.testing.assert_array_equal(one.values_on_nodes, many.values_on_nodes)


def test_damping_scales_like_the_stencil(unit_ball, params, coarse_spec):
    coarse = damping_bound(Grid.covering(unit_ball, 0.5), params, coarse_spec)
    fine = damping_bound(Grid.covering(unit_ball, 0.25), params, coarse_spec)
    assert coarse / fine >= 3.0


def test_rejects_bad_problems(unit_ball, grid, params, coarse_spec):
    g = parse_function("tanh_x:1")
    with pytest.raises(DomainError):
        DirichletProblem(unit_ball, ZERO, parse_function("quadratic"), params)
    with pytest.raises(DomainError):
        DirichletProblem(unit_ball, ZERO, g, OperatorParams(N=2))
    prob = problem(unit_ball, params, g)
    with pytest.raises(DomainError):
        solve_dirichlet(prob, grid, tol=0.0, spec=coarse_spec)
    with pytest.raises(DomainError):
        solve_dirichlet(prob, grid, spec=coarse_spec, method='multigrid')
    other = Grid.covering(GaugeBall(GroupPoint.origin(), 0.75), 0.5)
    with pytest.raises(DomainError):
        solve_dirichlet(prob, other, spec=coarse_spec)
    u, _ = solve_dirichlet(prob, grid, tol=1e-3, max_iter=50, spec=coarse_spec, method='policy')
    with pytest.raises(DomainError):
        check_viscosity_inequality(u, ZERO, params, coarse_spec, side='both')
