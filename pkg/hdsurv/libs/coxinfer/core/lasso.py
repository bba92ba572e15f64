#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the l1-penalized Cox fit, the unpenalized maximum partial likelihood fit and the
cross-validated selection of the lasso penalty
"""

from __future__ import print_function, division, absolute_import

import logging

import numpy as np
from joblib import Parallel, delayed

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core.kernel import CoxKernel

logger = logging.getLogger(consts.LIB_ID)


class CoxFit(object):
    """
    Coefficient vector returned by the lasso or MPLE solvers, with its convergence record
    """

    def __init__(
            self, beta, lam, objective, iterations, converged, tol, history=None, covariance=None, kkt=None,
            method='lasso'):
        self.beta = np.asarray(beta, dtype=float)
        self.beta.setflags(write=False)
        self.lam = float(lam)
        self.objective = float(objective)
        self.iterations = int(iterations)
        self.converged = bool(converged)
        self.tol = float(tol)
        self.history = tuple(history or (objective,))
        self.covariance = covariance
        self.kkt = kkt
        self.method = method
        self.ties = consts.TIES

    def __repr__(self):
        return '[{} - method: {}, lambda: {}, nonzero: {}, converged: {}]'.format(
            self.__class__.__name__, self.method, self.lam, self.support.size, self.converged)

    @property
    def support(self):
        return np.flatnonzero(self.beta)

    @property
    def std_errors(self):
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def as_dict(self, labels=None):
        labels = list(labels) if labels is not None else ['x{}'.format(i + 1) for i in range(self.beta.shape[0])]
        result = {
            'method': self.method,
            'lambda': self.lam,
            'beta': dict(zip(labels, self.beta.tolist())),
            'objective': self.objective,
            'iterations': self.iterations,
            'converged': self.converged,
            'tol': self.tol,
            'kkt_residual': self.kkt,
            'ties': self.ties,
        }
        if self.covariance is not None:
            result['std_errors'] = dict(zip(labels, self.std_errors.tolist()))
        return result


class CvCurve(object):
    def __init__(self, grid, losses, fold_count, seed=None, loss=consts.CvLosses.HELDOUT):
        self.grid = np.asarray(grid, dtype=float)
        self.losses = np.asarray(losses, dtype=float)
        self.fold_count = int(fold_count)
        self.seed = seed
        self.loss = loss
        # exact ties resolve to the earliest, i.e. the larger lambda
        self.chosen = int(np.argmin(self.losses))

    def __repr__(self):
        return '[{} - K: {}, chosen: {} (lambda={})]'.format(
            self.__class__.__name__, self.fold_count, self.chosen, self.chosen_lambda)

    @property
    def chosen_lambda(self):
        return float(self.grid[self.chosen])

    def as_dict(self):
        return {
            'grid': self.grid.tolist(), 'losses': self.losses.tolist(), 'K': self.fold_count,
            'chosen': self.chosen, 'seed': self.seed, 'loss': self.loss}


# ================================================================================================================
# HELPERS
# ================================================================================================================

def soft_threshold(value, threshold):
    return np.sign(value) * max(abs(value) - threshold, 0.0)


def kkt_residual(gradient, beta, lam):
    """
    Largest violation of the lasso stationarity conditions
    :param gradient: np.ndarray, score at beta
    :param beta: np.ndarray
    :param lam: float
    :return: float
    """

    if not beta.size:
        return 0.0
    nonzero = beta != 0
    residuals = np.where(
        nonzero, np.abs(gradient + lam * np.sign(beta)), np.maximum(np.abs(gradient) - lam, 0.0))
    return float(residuals.max())


def make_folds(n, fold_count, seed):
    """
    Assigns each subject to one of fold_count folds through a seeded permutation
    :return: np.ndarray of int
    """

    rng = np.random.Generator(np.random.Philox(seed))
    folds = np.empty(n, dtype=int)
    folds[rng.permutation(n)] = np.arange(n) % fold_count
    return folds


def check_folds(dataset, folds, fold_count):
    for fold in range(fold_count):
        if not np.any(dataset.status[folds != fold] == 1):
            raise exceptions.FoldWithoutEventsError(fold)


def _penalized(value, beta, lam):
    return value + lam * float(np.abs(beta).sum())


def _coordinate_descent(gradient, hessian, base, lam, tol, max_sweeps):
    """
    Minimizes the local quadratic model g.T d + 0.5 d.T H d + lam |base + d|_1 with cyclic soft-thresholded
    coordinate updates. Sweeps alternate between all coordinates and the current nonzero ones
    """

    beta = base.copy()
    diagonal = np.diag(hessian)
    hd = np.zeros_like(beta)
    coordinates = np.flatnonzero(diagonal > 0)
    active_only = False
    for _ in range(max_sweeps):
        candidates = coordinates[beta[coordinates] != 0] if active_only else coordinates
        largest = 0.0
        for j in candidates:
            curvature = diagonal[j]
            z = curvature * beta[j] - (gradient[j] + hd[j])
            updated = soft_threshold(z, lam) / curvature
            delta = updated - beta[j]
            if delta != 0.0:
                beta[j] = updated
                hd += hessian[:, j] * delta
                largest = max(largest, curvature * abs(delta))
        if largest < 0.1 * tol:
            if not active_only:
                break
            active_only = False
        else:
            active_only = True
    return beta


# ================================================================================================================
# OPERATIONS
# ================================================================================================================

def fit_lasso(
        dataset, lam, init=None, tol=consts.LASSO_TOL, max_iter=consts.LASSO_MAX_ITER, kernel=None, strict=False):
    """
    Minimizes l_n(beta) + lam |beta|_1 by outer Newton steps on a quadratic model of l_n, each solved by inner
    coordinate descent, followed by step halving so the penalized objective never increases
    :param dataset: SurvivalDataset
    :param lam: float, penalty level >= 0
    :param init: np.ndarray or None, warm start
    :param tol: float, tolerance on the KKT residual
    :param max_iter: int, outer iterations
    :param kernel: CoxKernel or None, reused kernel for dataset
    :param strict: bool, raise MaxIterExceededError instead of returning a non converged fit
    :return: CoxFit
    """

    if lam < 0:
        raise exceptions.SolverError('lambda must be >= 0, got {}'.format(lam))

    kernel = kernel or CoxKernel(dataset)
    beta = np.zeros(dataset.p) if init is None else np.array(init, dtype=float)
    evaluation = kernel.evaluate(beta)
    objective = _penalized(evaluation.value, beta, lam)
    if not np.isfinite(objective):
        raise exceptions.NonFiniteObjectiveError('Objective is not finite at the initial point')
    history = [objective]

    converged = False
    iterations = 0
    residual = kkt_residual(evaluation.gradient, beta, lam)
    while iterations < max_iter:
        if residual <= tol:
            converged = True
            break
        iterations += 1
        target = _coordinate_descent(
            evaluation.gradient, evaluation.hessian, beta, lam, tol, consts.LASSO_MAX_INNER_SWEEPS)
        direction = target - beta

        step = 1.0
        accepted = None
        for _ in range(consts.MAX_STEP_HALVINGS):
            candidate = beta + step * direction
            candidate_objective = _penalized(kernel.value(candidate), candidate, lam)
            if not np.isfinite(candidate_objective):
                raise exceptions.NonFiniteObjectiveError('Objective is not finite at iteration {}'.format(iterations))
            if candidate_objective <= objective:
                accepted = candidate
                break
            step *= 0.5
        if accepted is None:
            logger.debug('Lasso line search stalled at iteration {} (KKT residual {})'.format(iterations, residual))
            break

        beta = accepted
        evaluation = kernel.evaluate(beta)
        objective = _penalized(evaluation.value, beta, lam)
        history.append(objective)
        residual = kkt_residual(evaluation.gradient, beta, lam)

    if not converged and residual <= tol:
        converged = True

    fit = CoxFit(beta, lam, objective, iterations, converged, tol, history=history, kkt=residual, method='lasso')
    if converged:
        logger.debug('Lasso converged: {} after {} iterations'.format(fit, iterations))
    else:
        message = 'Lasso did not converge for lambda={} (KKT residual {} > {})'.format(lam, residual, tol)
        if strict:
            raise exceptions.MaxIterExceededError(message, fit=fit)
        logger.warning(message)

    return fit


def fit_mple(dataset, tol=consts.MPLE_TOL, max_iter=consts.MPLE_MAX_ITER, init=None, kernel=None):
    """
    Maximum partial likelihood estimate by damped Newton iterations with step halving
    :param dataset: SurvivalDataset
    :param tol: float, tolerance on the sup norm of the score
    :param max_iter: int
    :param init: np.ndarray or None
    :param kernel: CoxKernel or None
    :return: CoxFit
    """

    if dataset.p >= dataset.event_count:
        raise exceptions.SingularHessianError(
            'MPLE needs fewer covariates ({}) than events ({})'.format(dataset.p, dataset.event_count))

    kernel = kernel or CoxKernel(dataset)
    beta = np.zeros(dataset.p) if init is None else np.array(init, dtype=float)
    evaluation = kernel.evaluate(beta)
    history = [evaluation.value]
    converged = False

    iterations = 0
    for iterations in range(max_iter + 1):
        gradient, hessian = evaluation.gradient, evaluation.hessian
        if np.max(np.abs(gradient)) <= tol:
            converged = True
            break
        if iterations == max_iter:
            break

        condition = np.linalg.cond(hessian)
        if not np.isfinite(condition) or condition > consts.MPLE_CONDITION_LIMIT:
            raise exceptions.SingularHessianError('Hessian condition number {:.3g} at iteration {}'.format(
                condition, iterations))
        direction = np.linalg.solve(hessian, -gradient)

        step = 1.0
        accepted = None
        for _ in range(consts.MAX_STEP_HALVINGS):
            candidate = beta + step * direction
            value = kernel.value(candidate)
            if np.isfinite(value) and value <= evaluation.value:
                accepted = candidate
                break
            step *= 0.5
        if accepted is None:
            logger.debug('MPLE line search stalled at iteration {}'.format(iterations))
            break
        if np.max(np.abs(accepted)) > consts.MPLE_DIVERGENCE_BOUND:
            raise exceptions.MonotoneLikelihoodError(
                'Coefficients diverge (|beta| > {}): the partial likelihood is monotone'.format(
                    consts.MPLE_DIVERGENCE_BOUND))

        beta = accepted
        evaluation = kernel.evaluate(beta)
        history.append(evaluation.value)

    if converged and np.linalg.eigvalsh(evaluation.hessian)[0] < consts.MPLE_FLAT_EIGENVALUE:
        raise exceptions.MonotoneLikelihoodError('Information matrix is flat at the solution: monotone likelihood')

    covariance = None
    try:
        covariance = np.linalg.inv(evaluation.hessian) / dataset.n
    except np.linalg.LinAlgError:
        logger.warning('MPLE information matrix is not invertible')

    fit = CoxFit(
        beta, 0.0, evaluation.value, iterations, converged, tol, history=history, covariance=covariance,
        kkt=float(np.max(np.abs(evaluation.gradient))) if dataset.p else 0.0, method='mple')
    if not converged:
        logger.warning('MPLE did not converge: {}'.format(fit))

    return fit


def lambda_max(dataset, kernel=None):
    kernel = kernel or CoxKernel(dataset)
    return float(np.max(np.abs(kernel.score(np.zeros(dataset.p)))))


def lambda_grid(dataset, count=consts.LAMBDA_GRID_COUNT, ratio=consts.LAMBDA_GRID_RATIO, kernel=None):
    """
    Log-spaced penalty grid from lambda_max = |score(0)|_inf down to ratio * lambda_max
    :return: np.ndarray, descending
    """

    if count < 1:
        raise exceptions.SolverError('Grid count must be >= 1')
    if not 0 < ratio < 1:
        raise exceptions.SolverError('Grid ratio must be in (0, 1)')

    top = lambda_max(dataset, kernel=kernel)
    if top <= 0:
        raise exceptions.SolverError('Score vanishes at zero: every lambda gives the null model')
    if count == 1:
        return np.array([top])

    return np.geomspace(top, ratio * top, count)


def _fold_losses(dataset, train_rows, grid, cv_loss, tol, max_iter, full_kernel):
    train = dataset.subset(train_rows)
    test = dataset.subset(~train_rows)
    train_kernel = CoxKernel(train)
    test_kernel = CoxKernel(test) if test.n else None

    losses = np.empty(grid.shape[0])
    beta = None
    for position, lam in enumerate(grid):
        fit = fit_lasso(train, lam, init=beta, tol=tol, max_iter=max_iter, kernel=train_kernel)
        beta = np.array(fit.beta)
        losses[position] = fold_loss(fit.beta, train_kernel, test_kernel, full_kernel, cv_loss)

    return losses


def fold_loss(beta, train_kernel, test_kernel, full_kernel, cv_loss=consts.CvLosses.HELDOUT):
    """
    Cross-validation loss of one fold at beta
    :param beta: np.ndarray
    :param train_kernel: CoxKernel
    :param test_kernel: CoxKernel or None, kernel of the held-out fold
    :param full_kernel: CoxKernel, kernel of the whole dataset (used by the vvh loss)
    :param cv_loss: str
    :return: float
    """

    if cv_loss == consts.CvLosses.VVH:
        return full_kernel.n * full_kernel.value(beta) - train_kernel.n * train_kernel.value(beta)
    if test_kernel is None:
        return 0.0
    return test_kernel.n * test_kernel.value(beta)


def cv_lambda(
        dataset, grid, fold_count=consts.LAMBDA_FOLDS, seed=consts.DEFAULT_SEED, cv_loss=consts.CvLosses.HELDOUT,
        tol=consts.LASSO_TOL, max_iter=consts.LASSO_MAX_ITER, n_jobs=1):
    """
    K-fold cross-validation of the lasso penalty. Folds are fit along the grid with warm starts
    :param dataset: SurvivalDataset
    :param grid: iterable(float), descending penalty grid
    :param fold_count: int, K >= 2
    :param seed: int
    :param cv_loss: str, heldout or vvh
    :param n_jobs: int, folds fit concurrently
    :return: CvCurve
    """

    grid = np.asarray(grid, dtype=float)
    if fold_count < 2:
        raise exceptions.SolverError('At least two folds are needed')
    if cv_loss not in consts.CvLosses.ALL:
        raise exceptions.SolverError('Unknown CV loss "{}"'.format(cv_loss))
    if grid.size > 1 and np.any(np.diff(grid) > 0):
        raise exceptions.SolverError('Lambda grid must be descending')

    folds = make_folds(dataset.n, fold_count, seed)
    check_folds(dataset, folds, fold_count)
    full_kernel = CoxKernel(dataset)

    per_fold = Parallel(n_jobs=n_jobs)(
        delayed(_fold_losses)(dataset, folds != fold, grid, cv_loss, tol, max_iter, full_kernel)
        for fold in range(fold_count))
    curve = CvCurve(grid, np.sum(per_fold, axis=0), fold_count, seed=seed, loss=cv_loss)
    logger.debug('Lambda cross-validation: {}'.format(curve))

    return curve
