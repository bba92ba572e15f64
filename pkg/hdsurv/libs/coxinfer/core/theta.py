#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the row-wise quadratic programming estimate of the inverse information matrix and the
hard-thresholded cross-validation used to choose its tuning parameter gamma
"""

from __future__ import print_function, division, absolute_import

import logging

import numpy as np
from scipy import linalg, stats
from joblib import Parallel, delayed

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import lasso, qp
from hdsurv.libs.coxinfer.core.kernel import CoxKernel

logger = logging.getLogger(consts.LIB_ID)


class ThetaHat(object):
    """
    p x p matrix whose row j solves min m.T S m subject to |S m - e_j|_inf <= gamma. Not symmetrized
    """

    def __init__(self, matrix, gamma, ridge=0.0, row_kkt=None, active_sizes=None, sigma=None):
        self.matrix = np.asarray(matrix, dtype=float)
        self.matrix.setflags(write=False)
        self.gamma = float(gamma)
        self.ridge = float(ridge)
        self.row_kkt = np.zeros(self.p) if row_kkt is None else np.asarray(row_kkt, dtype=float)
        self.active_sizes = np.zeros(self.p, dtype=int) if active_sizes is None else np.asarray(active_sizes)
        # lifted sigma the rows were solved against
        self.sigma = sigma

    def __repr__(self):
        return '[{} - p: {}, gamma: {}, ridge: {}]'.format(self.__class__.__name__, self.p, self.gamma, self.ridge)

    @property
    def p(self):
        return self.matrix.shape[0]

    @property
    def diagonal(self):
        return np.diag(self.matrix)

    @property
    def max_row_kkt(self):
        return float(self.row_kkt.max()) if self.row_kkt.size else 0.0

    def asymmetry(self):
        scale = np.max(np.abs(self.matrix))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(self.matrix - self.matrix.T)) / scale)

    def row_violations(self, sigma=None):
        """
        Recomputes |S m_j - e_j|_inf - gamma for every row, independently of the solver
        :return: np.ndarray
        """

        sigma = self.sigma if sigma is None else np.asarray(getattr(sigma, 'matrix', sigma), dtype=float)
        residual = self.matrix @ sigma - np.eye(self.p)
        return np.max(np.abs(residual), axis=1) - self.gamma

    def sidecar(self):
        return {'gamma': self.gamma, 'ridge': self.ridge, 'max_row_kkt': self.max_row_kkt}


class GammaCurve(object):
    def __init__(self, grid, losses, fold_count, alpha, seed=None, denominator=consts.ThresholdDenominators.SQRT_DIAG):
        self.grid = np.asarray(grid, dtype=float)
        self.losses = np.asarray(losses, dtype=float)
        self.fold_count = int(fold_count)
        self.alpha = float(alpha)
        self.seed = seed
        self.denominator = denominator
        # the grid is ascending, so exact ties resolve to the smaller gamma
        self.chosen = int(np.argmin(self.losses))

    def __repr__(self):
        return '[{} - K: {}, chosen: {} (gamma={})]'.format(
            self.__class__.__name__, self.fold_count, self.chosen, self.chosen_gamma)

    @property
    def chosen_gamma(self):
        return float(self.grid[self.chosen])

    def as_dict(self):
        return {
            'grid': self.grid.tolist(), 'losses': self.losses.tolist(), 'K': self.fold_count, 'alpha': self.alpha,
            'chosen': self.chosen, 'seed': self.seed, 'denominator': self.denominator}


# ================================================================================================================
# OPERATIONS
# ================================================================================================================

def lift_sigma(sigma):
    """
    Adds eps * I with eps = 1e-8 trace / p when the matrix is not safely positive definite
    :param sigma: SigmaHat or np.ndarray
    :return: tuple(np.ndarray, float), lifted matrix and eps (0 when untouched)
    """

    matrix = np.asarray(getattr(sigma, 'matrix', sigma), dtype=float)
    p = matrix.shape[0]
    needs_lift = False
    try:
        linalg.cholesky(matrix, lower=True)
        needs_lift = np.linalg.eigvalsh(matrix)[0] < consts.RIDGE_EIGENVALUE_FLOOR
    except linalg.LinAlgError:
        needs_lift = True
    if not needs_lift:
        return matrix, 0.0

    ridge = consts.RIDGE_SCALE * np.trace(matrix) / p
    if ridge <= 0:
        ridge = consts.RIDGE_SCALE
    logger.warning('Sigma is not positive definite: lifting diagonal by {:.3g}'.format(ridge))

    return matrix + ridge * np.eye(p), float(ridge)


def _solve_rows(solver, rows, gamma):
    solutions = list()
    for j in rows:
        try:
            solutions.append(solver.solve(j, gamma))
        except exceptions.QpError as exc:
            raise exceptions.ThetaRowError(j, exc)
    return solutions


def estimate_theta(sigma, gamma, tol=consts.QP_TOL, n_jobs=1, solver=None):
    """
    Solves the p row problems and stacks the solutions as rows
    :param sigma: SigmaHat or np.ndarray
    :param gamma: float, >= 0
    :param tol: float
    :param n_jobs: int, rows solved concurrently in chunks
    :param solver: ThetaRowSolver or None, reuse a factorization of the lifted sigma
    :return: ThetaHat
    """

    if gamma < 0:
        raise exceptions.QpError('gamma must be >= 0, got {}'.format(gamma))

    ridge = 0.0
    if solver is None:
        lifted, ridge = lift_sigma(sigma)
        try:
            solver = qp.ThetaRowSolver(lifted, tol=tol)
        except exceptions.QpError as exc:
            raise exceptions.ThetaRowError(0, exc)
    p = solver.p

    if n_jobs == 1 or p < 2:
        solutions = _solve_rows(solver, range(p), gamma)
    else:
        chunks = [chunk for chunk in np.array_split(np.arange(p), min(p, abs(n_jobs) * 4)) if chunk.size]
        parts = Parallel(n_jobs=n_jobs, prefer='threads')(
            delayed(_solve_rows)(solver, chunk, gamma) for chunk in chunks)
        solutions = [solution for part in parts for solution in part]

    matrix = np.vstack([solution.x for solution in solutions])
    theta = ThetaHat(
        matrix, gamma, ridge=ridge, row_kkt=[solution.kkt_residual for solution in solutions],
        active_sizes=[len(solution.active_set) for solution in solutions], sigma=solver.sigma)

    if np.any(theta.diagonal < -1e-10):
        logger.warning('Theta has negative diagonal entries: min {}'.format(theta.diagonal.min()))
    logger.debug('Estimated {} (max row KKT {:.3g})'.format(theta, theta.max_row_kkt))

    return theta


def threshold_cutoff(p, alpha):
    """
    Bonferroni cutoff z_{alpha / (2p)}, the upper alpha / (2p) quantile of N(0, 1)
    """

    return float(stats.norm.isf(alpha / (2.0 * p)))


def standardized_statistics(b, theta, n, denominator=consts.ThresholdDenominators.SQRT_DIAG, strict=True):
    """
    sqrt(n) |b_j| divided by sqrt(Theta_jj) (or Theta_jj). With strict=False coordinates with a non positive
    diagonal get a zero statistic instead of raising
    """

    diagonal = theta.diagonal if isinstance(theta, ThetaHat) else np.diag(np.asarray(theta))
    positive = diagonal > 0
    if strict and not np.all(positive):
        raise exceptions.NonPositiveDiagonalError('Theta has a non positive diagonal entry')
    safe = np.where(positive, diagonal, 1.0)
    scale = np.sqrt(safe) if denominator == consts.ThresholdDenominators.SQRT_DIAG else safe
    return np.where(positive, np.sqrt(n) * np.abs(b) / scale, 0.0)


def hard_threshold(
        b, theta, n, alpha=consts.THRESHOLD_ALPHA, denominator=consts.ThresholdDenominators.SQRT_DIAG, strict=True):
    """
    Keeps b_j when sqrt(n) |b_j| / sqrt(Theta_jj) exceeds z_{alpha / (2p)}, zero otherwise.
    denominator='diag' divides by Theta_jj instead of its square root
    :return: np.ndarray
    """

    if denominator not in consts.ThresholdDenominators.ALL:
        raise exceptions.InferenceError('Unknown threshold denominator "{}"'.format(denominator))
    b = np.asarray(b, dtype=float)
    statistics = standardized_statistics(b, theta, n, denominator=denominator, strict=strict)
    return np.where(statistics > threshold_cutoff(b.shape[0], alpha), b, 0.0)


def default_gamma_grid(n, p, multipliers=consts.GAMMA_MULTIPLIERS):
    """
    multipliers x sqrt(log p / n), keeping values below 1
    :return: np.ndarray, ascending
    """

    base = np.sqrt(np.log(max(p, 2)) / n)
    grid = np.unique(np.asarray(multipliers, dtype=float) * base)
    grid = grid[(grid > 0) & (grid < 1)]
    if not grid.size:
        raise exceptions.ConfigError('Default gamma grid is empty for n={}, p={}'.format(n, p))
    return grid


class _FoldContext(object):
    """
    Per fold quantities that do not depend on gamma: the training lasso fit, its score and the factorized
    sigma of the training data
    """

    def __init__(self, dataset, train_rows, lam, sigma_builder, tol, lasso_tol, max_iter):
        self.train = dataset.subset(train_rows)
        self.test = dataset.subset(~train_rows)
        self.train_kernel = CoxKernel(self.train)
        self.test_kernel = CoxKernel(self.test) if self.test.n else None
        fit = lasso.fit_lasso(self.train, lam, tol=lasso_tol, max_iter=max_iter, kernel=self.train_kernel)
        self.beta = np.array(fit.beta)
        self.gradient = self.train_kernel.score(self.beta)
        sigma = sigma_builder(self.train, self.beta) if sigma_builder else self.train_kernel.sigma_hat(self.beta)
        lifted, self.ridge = lift_sigma(sigma)
        self.solver = qp.ThetaRowSolver(lifted, tol=tol)


def _fold_gamma_losses(
        dataset, train_rows, lam, gamma_grid, alpha, denominator, cv_loss, sigma_builder, tol, lasso_tol, max_iter,
        full_kernel):
    context = _FoldContext(dataset, train_rows, lam, sigma_builder, tol, lasso_tol, max_iter)
    losses = np.empty(len(gamma_grid))
    for position, gamma in enumerate(gamma_grid):
        theta = estimate_theta(None, gamma, tol=tol, solver=context.solver)
        b = context.beta - theta.matrix @ context.gradient
        thresholded = hard_threshold(
            b, theta, context.train.n, alpha=alpha, denominator=denominator, strict=False)
        losses[position] = lasso.fold_loss(
            thresholded, context.train_kernel, context.test_kernel, full_kernel, cv_loss=cv_loss)
    return losses


def cv_gamma(
        dataset, gamma_grid, lam, fold_count=consts.GAMMA_FOLDS, alpha=consts.THRESHOLD_ALPHA,
        seed=consts.DEFAULT_SEED, sigma_builder=None, denominator=consts.ThresholdDenominators.SQRT_DIAG,
        cv_loss=consts.CvLosses.HELDOUT, tol=consts.QP_TOL, lasso_tol=consts.LASSO_TOL,
        max_iter=consts.LASSO_MAX_ITER, n_jobs=1):
    """
    Chooses gamma by K-fold cross-validation: for every fold the lasso and Theta are fit on the training folds,
    the debiased estimate is hard-thresholded and the negative log partial likelihood of the held-out fold is
    evaluated at it. loss(gamma) = sum_k n_k l_k
    :param dataset: SurvivalDataset
    :param gamma_grid: iterable(float), positive ascending
    :param lam: float, lasso penalty used on every training set
    :param fold_count: int
    :param alpha: float, thresholding level
    :param seed: int
    :param sigma_builder: callable(SurvivalDataset, beta) -> SigmaHat or np.ndarray; None uses sigma_hat
    :param denominator: str, sqrt-diag or diag
    :param cv_loss: str, heldout or vvh
    :param n_jobs: int, folds evaluated concurrently
    :return: GammaCurve
    """

    gamma_grid = np.asarray(gamma_grid, dtype=float)
    if fold_count < 2:
        raise exceptions.SolverError('At least two folds are needed')
    if not gamma_grid.size or np.any(gamma_grid < 0) or np.any(np.diff(gamma_grid) < 0):
        raise exceptions.ConfigError('Gamma grid must be nonnegative and ascending')

    folds = lasso.make_folds(dataset.n, fold_count, seed)
    lasso.check_folds(dataset, folds, fold_count)
    full_kernel = CoxKernel(dataset)

    per_fold = Parallel(n_jobs=n_jobs)(
        delayed(_fold_gamma_losses)(
            dataset, folds != fold, lam, gamma_grid, alpha, denominator, cv_loss, sigma_builder, tol, lasso_tol,
            max_iter, full_kernel)
        for fold in range(fold_count))
    curve = GammaCurve(gamma_grid, np.sum(per_fold, axis=0), fold_count, alpha, seed=seed, denominator=denominator)
    logger.debug('Gamma cross-validation: {}'.format(curve))

    return curve

