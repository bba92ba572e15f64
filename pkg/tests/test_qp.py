#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains tests for the dual active-set quadratic programming solver
"""

import itertools

import numpy as np
import pytest

from hdsurv.libs.coxinfer.core import exceptions
from hdsurv.libs.coxinfer.core import qp


def enumerate_active_sets(problem):
    """
    Brute force solution of a small strictly convex QP: the unique point satisfying the KKT conditions for some
    active set
    """

    dimension, count = problem.dimension, problem.constraint_count
    for size in range(min(dimension, count) + 1):
        for active in itertools.combinations(range(count), size):
            active = list(active)
            normals = problem.C[active]
            system = np.zeros((dimension + size, dimension + size))
            system[:dimension, :dimension] = problem.Q
            system[:dimension, dimension:] = -normals.T
            system[dimension:, :dimension] = normals
            if np.linalg.matrix_rank(system) < dimension + size:
                continue
            solution = np.linalg.solve(system, np.concatenate([-problem.d, problem.b[active]]))
            x, multipliers = solution[:dimension], solution[dimension:]
            if np.all(problem.C @ x - problem.b >= -1e-9) and np.all(multipliers >= -1e-9):
                return x
    raise AssertionError('No KKT point found')


def random_problem(seed, dimension, count):
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((dimension, dimension))
    C = rng.standard_normal((count, dimension))
    feasible = rng.standard_normal(dimension)
    return qp.QpProblem(
        factor @ factor.T + 0.5 * np.eye(dimension), rng.standard_normal(dimension), C,
        C @ feasible - rng.uniform(0.0, 1.0, count))


@pytest.mark.parametrize('seed', range(8))
def test_matches_active_set_enumeration(seed):
    problem = random_problem(seed, 3, 6)
    solution = qp.solve_qp(problem)

    np.testing.assert_allclose(solution.x, enumerate_active_sets(problem), atol=1e-8)
    assert solution.objective == pytest.approx(problem.objective(solution.x))


@pytest.mark.parametrize('seed', range(5))
def test_kkt_residuals_are_small(seed):
    problem = random_problem(100 + seed, 12, 30)
    solution = qp.solve_qp(problem)
    report = qp.kkt_check(problem, solution)

    assert report.max_residual < 1e-8
    assert solution.kkt_residual < 1e-8
    assert np.all(solution.multipliers >= 0)
    assert len(solution.active_set) <= problem.dimension


def test_unconstrained_problem():
    problem = qp.QpProblem(np.diag([2.0, 4.0]), [-2.0, 4.0])
    solution = qp.solve_qp(problem)

    np.testing.assert_allclose(solution.x, [1.0, -1.0])
    assert solution.active_set == ()
    assert solution.changes == 0


def test_single_active_constraint():
    problem = qp.QpProblem(np.eye(2), [0.0, 0.0], C=[[1.0, 1.0]], b=[2.0])
    solution = qp.solve_qp(problem)

    np.testing.assert_allclose(solution.x, [1.0, 1.0])
    assert solution.active_set == (0,)
    np.testing.assert_allclose(solution.full_multipliers(1), [1.0])


def test_infeasible_problem():
    problem = qp.QpProblem([[1.0]], [0.0], C=[[1.0], [-1.0]], b=[1.0, 0.0])
    with pytest.raises(exceptions.InfeasibleError):
        qp.solve_qp(problem)


def test_indefinite_matrix():
    with pytest.raises(exceptions.NotPositiveDefiniteError):
        qp.solve_qp(qp.QpProblem([[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0]))


def test_inconsistent_dimensions():
    with pytest.raises(exceptions.DimensionMismatchError):
        qp.QpProblem(np.eye(2), [0.0, 0.0], C=[[1.0, 0.0]], b=[1.0, 2.0])


def test_theta_row_on_diagonal_sigma():
    solver = qp.ThetaRowSolver(np.diag([2.0, 1.0]))
    solution = solver.solve(0, 0.1)

    np.testing.assert_allclose(solution.x, [0.45, 0.0], atol=1e-12)
    np.testing.assert_allclose(solution.full_multipliers(4), [0.45, 0.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(qp.solve_theta_row(np.diag([2.0, 1.0]), 1, 0.1), [0.0, 0.9], atol=1e-12)


def test_theta_row_with_zero_gamma_is_inverse_row():
    rng = np.random.default_rng(1)
    factor = rng.standard_normal((5, 5))
    sigma = factor @ factor.T + np.eye(5)
    solution = qp.ThetaRowSolver(sigma).solve(2, 0.0)

    np.testing.assert_allclose(solution.x, np.linalg.inv(sigma)[2], atol=1e-10)


def test_theta_row_negative_gamma():
    with pytest.raises(exceptions.QpError):
        qp.ThetaRowSolver(np.eye(2)).solve(0, -0.1)


def projected_gradient_solution(problem, iterations=50000, tolerance=1e-14):
    """
    Solves the QP through its dual, min 0.5 u.T H u - q.T u over u >= 0, with accelerated projected gradient
    steps and gradient restarts, then recovers the primal point from the multipliers
    """

    Q_inv = np.linalg.inv(problem.Q)
    H = problem.C @ Q_inv @ problem.C.T
    q = problem.C @ Q_inv @ problem.d + problem.b
    step = 1.0 / np.linalg.eigvalsh(H)[-1]

    u = np.zeros(problem.constraint_count)
    y = u.copy()
    t = 1.0
    for _ in range(iterations):
        u_next = np.maximum(y - step * (H @ y - q), 0.0)
        if np.max(np.abs(u_next - u)) < tolerance:
            u = u_next
            break
        if (y - u_next) @ (u_next - u) > 0:
            t, y = 1.0, u_next
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = u_next + ((t - 1.0) / t_next) * (u_next - u)
            t = t_next
        u = u_next

    return Q_inv @ (problem.C.T @ u - problem.d)


def well_conditioned_problem(rng):
    dimension = int(rng.integers(2, 21))
    count = int(rng.integers(1, min(60, 3 * dimension) + 1))
    factor = rng.standard_normal((dimension, dimension))
    C = rng.standard_normal((count, dimension))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    feasible = rng.standard_normal(dimension)
    slack = np.where(rng.uniform(size=count) < 0.3, 0.0, rng.uniform(0.0, 1.0, count))
    return qp.QpProblem(
        factor @ factor.T / dimension + np.eye(dimension), 3.0 * rng.standard_normal(dimension), C,
        C @ feasible - slack)


def test_matches_projected_gradient_on_random_problems():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        problem = well_conditioned_problem(rng)
        solution = qp.solve_qp(problem)

        np.testing.assert_allclose(solution.x, projected_gradient_solution(problem), atol=1e-5)
        assert qp.kkt_check(problem, solution).max_residual < 1e-8


def test_unconstrained_start_already_feasible():
    # the unconstrained minimizer satisfies every constraint, so nothing is added
    problem = qp.QpProblem(np.eye(2), [-1.0, -1.0], C=[[1.0, 0.0], [0.0, 1.0]], b=[0.0, 0.0])
    solution = qp.solve_qp(problem)

    np.testing.assert_allclose(solution.x, [1.0, 1.0])
    assert solution.active_set == ()
