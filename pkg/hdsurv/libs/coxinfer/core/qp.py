#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains a dual active-set solver for strictly convex quadratic programs

    minimize 0.5 x.T Q x + d.T x   subject to   C x >= b

The solver starts at the unconstrained minimum, adds the most violated constraint at each stage and keeps the
multipliers of the working set nonnegative, dropping constraints when a multiplier would become negative. All
linear algebra runs on the Cholesky factor L of Q: with w_i = L^-1 c_i the working-set matrix is W.T W, whose
upper triangular factor is extended by one column on every addition and re-factored on drops.
"""

from __future__ import print_function, division, absolute_import

import logging

import numpy as np
from scipy import linalg

from hdsurv.libs.coxinfer.core import consts, exceptions

logger = logging.getLogger(consts.LIB_ID)


class QpProblem(object):
    def __init__(self, Q, d, C=None, b=None):
        self.Q = np.asarray(Q, dtype=float)
        self.d = np.asarray(d, dtype=float).reshape(-1)
        dimension = self.d.shape[0]
        self.C = np.zeros((0, dimension)) if C is None else np.asarray(C, dtype=float).reshape(-1, dimension)
        self.b = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
        if self.Q.shape != (dimension, dimension) or self.b.shape[0] != self.C.shape[0]:
            raise exceptions.DimensionMismatchError('Inconsistent QP dimensions')

    def __repr__(self):
        return '[{} - dimension: {}, constraints: {}]'.format(
            self.__class__.__name__, self.dimension, self.constraint_count)

    @property
    def dimension(self):
        return self.d.shape[0]

    @property
    def constraint_count(self):
        return self.C.shape[0]

    def objective(self, x):
        return float(0.5 * x @ self.Q @ x + self.d @ x)


class QpSolution(object):
    def __init__(self, x, objective, active_set, multipliers, kkt_residual, changes):
        self.x = x
        self.objective = objective
        self.active_set = tuple(int(i) for i in active_set)
        self.multipliers = np.asarray(multipliers, dtype=float)
        self.kkt_residual = kkt_residual
        self.changes = changes

    def __repr__(self):
        return '[{} - objective: {}, active: {}, kkt: {:.3g}]'.format(
            self.__class__.__name__, self.objective, len(self.active_set), self.kkt_residual)

    def full_multipliers(self, constraint_count):
        multipliers = np.zeros(constraint_count)
        if self.active_set:
            multipliers[list(self.active_set)] = self.multipliers
        return multipliers


class KktReport(object):
    def __init__(self, stationarity, min_slack, complementarity, dual_infeasibility):
        self.stationarity = stationarity
        self.min_slack = min_slack
        self.primal_infeasibility = max(0.0, -min_slack)
        self.complementarity = complementarity
        self.dual_infeasibility = dual_infeasibility

    def __repr__(self):
        return '[{} - stationarity: {:.3g}, primal: {:.3g}, complementarity: {:.3g}]'.format(
            self.__class__.__name__, self.stationarity, self.primal_infeasibility, self.complementarity)

    @property
    def max_residual(self):
        return max(self.stationarity, self.primal_infeasibility, self.complementarity, self.dual_infeasibility)


class DualActiveSetSolver(object):
    """
    Solver bound to one positive definite Q. The Cholesky factor and the transformed constraint normals are
    computed once and shared by every solve with the same Q and C (several right hand sides b and d).
    """

    def __init__(self, Q, C=None, factor=None, tol=consts.QP_TOL, max_changes=None):
        self._Q = np.asarray(Q, dtype=float)
        dimension = self._Q.shape[0]
        self._C = np.zeros((0, dimension)) if C is None else np.asarray(C, dtype=float).reshape(-1, dimension)
        if factor is None:
            try:
                factor = linalg.cholesky(self._Q, lower=True)
            except linalg.LinAlgError:
                raise exceptions.NotPositiveDefiniteError('Cholesky factorization of Q failed')
        self._factor = factor
        self._normals = linalg.solve_triangular(factor, self._C.T, lower=True) if self._C.size else \
            np.zeros((dimension, 0))
        self._tol = tol
        self._max_changes = max_changes or consts.QP_MAX_CHANGES_PER_DIM * max(dimension, 1)

    def __repr__(self):
        return '[{} - dimension: {}, constraints: {}]'.format(
            self.__class__.__name__, self._Q.shape[0], self._C.shape[0])

    @property
    def factor(self):
        return self._factor

    def unconstrained_minimum(self, d):
        return -linalg.cho_solve((self._factor, True), d)

    def solve(self, d, b):
        """
        Solves the program for the given linear term and bounds
        :param d: np.ndarray
        :param b: np.ndarray
        :return: QpSolution
        """

        tol = self._tol
        C = self._C
        normals = self._normals
        d = np.asarray(d, dtype=float)
        b = np.asarray(b, dtype=float)

        x = self.unconstrained_minimum(d)
        active = list()
        multipliers = np.zeros(0)
        triangle = np.zeros((0, 0))
        changes = 0

        while C.shape[0]:
            slack = C @ x - b
            slack[active] = np.inf
            added = int(np.argmin(slack))
            if slack[added] >= -tol:
                break

            normal = normals[:, added]
            added_multiplier = 0.0
            while True:
                changes += 1
                if changes > self._max_changes:
                    raise exceptions.MaxActiveSetChangesError(
                        'More than {} active-set changes'.format(self._max_changes))

                if active:
                    projection = linalg.solve_triangular(triangle, normals[:, active].T @ normal, trans='T')
                    dual_direction = linalg.solve_triangular(triangle, projection)
                    primal_normal = normal - normals[:, active] @ dual_direction
                else:
                    dual_direction = np.zeros(0)
                    primal_normal = normal

                partial_step, dropped = np.inf, None
                blocking = np.zeros(0, dtype=int)
                if dual_direction.size:
                    blocking = np.flatnonzero(dual_direction > tol * max(1.0, np.abs(dual_direction).max()))
                if blocking.size:
                    ratios = multipliers[blocking] / dual_direction[blocking]
                    dropped = int(blocking[np.argmin(ratios)])
                    partial_step = float(ratios.min())

                curvature = float(primal_normal @ primal_normal)
                full_step = np.inf
                if curvature > tol * tol * max(1.0, float(normal @ normal)):
                    full_step = -(C[added] @ x - b[added]) / curvature

                step = min(partial_step, full_step)
                if not np.isfinite(step):
                    raise exceptions.InfeasibleError(
                        'Constraint {} cannot be satisfied together with the active set'.format(added))

                if np.isfinite(full_step):
                    x = x + step * linalg.solve_triangular(self._factor, primal_normal, trans='T', lower=True)
                multipliers = multipliers - step * dual_direction
                added_multiplier += step

                if full_step <= partial_step:
                    triangle = self._append_column(triangle, normals[:, active], normal)
                    active.append(added)
                    multipliers = np.append(multipliers, added_multiplier)
                    break

                del active[dropped]
                multipliers = np.delete(multipliers, dropped)
                triangle = self._refactor(normals[:, active])

        stationarity, min_slack, complementarity, dual = _kkt_terms(
            self._Q, d, C, b, x, active, multipliers)
        residual = max(stationarity, max(0.0, -min_slack), complementarity, dual)
        solution = QpSolution(
            x, float(0.5 * x @ self._Q @ x + d @ x), active, np.clip(multipliers, 0.0, None), residual, changes)
        logger.debug('QP solved: {}'.format(solution))

        return solution

    # ============================================================================================================
    # INTERNAL
    # ============================================================================================================

    def _append_column(self, triangle, current, column):
        size = triangle.shape[0]
        if not size:
            return np.array([[np.sqrt(column @ column)]])
        top = linalg.solve_triangular(triangle, current.T @ column, trans='T')
        corner = np.sqrt(max(column @ column - top @ top, 0.0))
        extended = np.zeros((size + 1, size + 1))
        extended[:size, :size] = triangle
        extended[:size, size] = top
        extended[size, size] = corner
        return extended

    def _refactor(self, current):
        if not current.shape[1]:
            return np.zeros((0, 0))
        return linalg.qr(current, mode='r')[0][:current.shape[1]]


def _kkt_terms(Q, d, C, b, x, active, multipliers):
    full = np.zeros(C.shape[0])
    if len(active):
        full[list(active)] = multipliers
    gradient = Q @ x + d - C.T @ full
    slack = C @ x - b
    stationarity = float(np.max(np.abs(gradient))) if gradient.size else 0.0
    min_slack = float(slack.min()) if slack.size else 0.0
    complementarity = float(np.max(np.abs(full * slack))) if slack.size else 0.0
    dual = float(max(0.0, -full.min())) if full.size else 0.0
    return stationarity, min_slack, complementarity, dual


# ================================================================================================================
# OPERATIONS
# ================================================================================================================

def solve_qp(problem, tol=consts.QP_TOL):
    """
    Solves a strictly convex QP with the dual active-set method
    :param problem: QpProblem
    :param tol: float
    :return: QpSolution
    """

    solver = DualActiveSetSolver(problem.Q, problem.C, tol=tol)
    return solver.solve(problem.d, problem.b)


def kkt_check(problem, solution):
    """
    Recomputes stationarity, feasibility and complementarity residuals from the problem data and the returned
    point and multipliers only
    :param problem: QpProblem
    :param solution: QpSolution
    :return: KktReport
    """

    stationarity, min_slack, complementarity, dual = _kkt_terms(
        problem.Q, problem.d, problem.C, problem.b, np.asarray(solution.x, dtype=float), solution.active_set,
        solution.multipliers)
    return KktReport(stationarity, min_slack, complementarity, dual)


class ThetaRowSolver(object):
    """
    Solves min m.T S m subject to |S m - e_j|_inf <= gamma for every j with one shared factorization of S.
    The box constraint is encoded as the 2p inequalities S m >= e_j - gamma and -S m >= -e_j - gamma
    """

    def __init__(self, sigma, tol=consts.QP_TOL):
        self._sigma = np.asarray(getattr(sigma, 'matrix', sigma), dtype=float)
        self._solver = DualActiveSetSolver(self._sigma, np.vstack([self._sigma, -self._sigma]), tol=tol)

    def __repr__(self):
        return '[{} - p: {}]'.format(self.__class__.__name__, self.p)

    @property
    def p(self):
        return self._sigma.shape[0]

    @property
    def sigma(self):
        return self._sigma

    def constraint_bounds(self, j, gamma):
        unit = np.zeros(self.p)
        unit[j] = 1.0
        return np.concatenate([unit - gamma, -unit - gamma])

    def solve(self, j, gamma):
        """
        :param j: int, row index
        :param gamma: float, >= 0
        :return: QpSolution
        """

        if gamma < 0:
            raise exceptions.QpError('gamma must be >= 0, got {}'.format(gamma))

        if gamma == 0:
            # the constraint set is the single point S^-1 e_j
            unit = np.zeros(self.p)
            unit[j] = 1.0
            m = linalg.cho_solve((self._solver.factor, True), unit)
            return QpSolution(m, float(0.5 * m @ self._sigma @ m), (), (), 0.0, 0)

        return self._solver.solve(np.zeros(self.p), self.constraint_bounds(j, gamma))


def solve_theta_row(sigma, j, gamma, tol=consts.QP_TOL):
    """
    Row j of the inverse information estimate: argmin m.T S m subject to |S m - e_j|_inf <= gamma
    :param sigma: SigmaHat or np.ndarray, positive definite
    :param j: int
    :param gamma: float
    :param tol: float
    :return: np.ndarray
    """

    return ThetaRowSolver(sigma, tol=tol).solve(j, gamma).x
