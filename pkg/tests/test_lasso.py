#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains tests for the lasso and maximum partial likelihood solvers and lambda cross-validation
"""

import numpy as np
import pytest
from scipy import optimize

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import lasso
from hdsurv.libs.coxinfer.core.data import SurvivalDataset
from hdsurv.libs.coxinfer.core.kernel import CoxKernel


def test_lambda_above_max_gives_zero(small_dataset):
    top = lasso.lambda_max(small_dataset)
    fit = lasso.fit_lasso(small_dataset, top * 1.01)

    assert fit.converged
    assert fit.iterations == 0
    np.testing.assert_array_equal(fit.beta, np.zeros(small_dataset.p))
    assert fit.support.size == 0


def test_lasso_satisfies_kkt(small_dataset):
    lam = 0.3 * lasso.lambda_max(small_dataset)
    fit = lasso.fit_lasso(small_dataset, lam)
    gradient = CoxKernel(small_dataset).score(fit.beta)

    assert fit.converged
    assert lasso.kkt_residual(gradient, fit.beta, lam) <= fit.tol
    assert 0 < fit.support.size < small_dataset.p
    assert all(later <= earlier for earlier, later in zip(fit.history, fit.history[1:]))


def test_lasso_warm_start_reaches_same_solution(small_dataset):
    lam = 0.1 * lasso.lambda_max(small_dataset)
    cold = lasso.fit_lasso(small_dataset, lam)
    warm = lasso.fit_lasso(small_dataset, lam, init=cold.beta + 0.05)

    np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-6)


def test_lasso_without_penalty_matches_mple(small_dataset):
    fit = lasso.fit_lasso(small_dataset, 0.0)
    mple = lasso.fit_mple(small_dataset)

    assert mple.converged
    np.testing.assert_allclose(fit.beta, mple.beta, atol=1e-5)


def test_lasso_negative_lambda(small_dataset):
    with pytest.raises(exceptions.SolverError):
        lasso.fit_lasso(small_dataset, -1.0)


def test_lasso_strict_iteration_limit(small_dataset):
    with pytest.raises(exceptions.MaxIterExceededError) as info:
        lasso.fit_lasso(small_dataset, 1e-3, tol=1e-14, max_iter=1, strict=True)
    assert info.value.fit is not None
    assert not info.value.fit.converged


def test_soft_threshold():
    assert lasso.soft_threshold(3.0, 1.0) == 2.0
    assert lasso.soft_threshold(-3.0, 1.0) == -2.0
    assert lasso.soft_threshold(0.5, 1.0) == 0.0


def test_mple_matches_closed_form_root(crossed_dataset):
    def weighted_mean_shift(beta):
        first = (np.exp(beta) - np.exp(-beta)) / (1.0 + np.exp(beta) + np.exp(-beta))
        return 1.0 - first - np.tanh(beta)

    root = optimize.brentq(weighted_mean_shift, 0.0, 10.0, xtol=1e-14)
    fit = lasso.fit_mple(crossed_dataset)

    assert fit.converged
    assert fit.beta[0] == pytest.approx(root, abs=1e-8)
    assert fit.std_errors[0] > 0


def test_mple_separated_data(hand_dataset):
    with pytest.raises(exceptions.MonotoneLikelihoodError):
        lasso.fit_mple(hand_dataset)


def test_mple_needs_more_events_than_covariates():
    dataset = SurvivalDataset([1.0, 2.0, 3.0], [1, 0, 0], [[0.0, 1.0], [1.0, 0.0], [2.0, 1.0]])
    with pytest.raises(exceptions.SingularHessianError):
        lasso.fit_mple(dataset)


def test_lambda_grid(small_dataset):
    grid = lasso.lambda_grid(small_dataset, count=8, ratio=0.05)

    assert grid.shape == (8,)
    assert grid[0] == pytest.approx(lasso.lambda_max(small_dataset))
    assert grid[-1] == pytest.approx(0.05 * grid[0])
    assert np.all(np.diff(grid) < 0)


def test_make_folds_is_balanced_and_seeded():
    folds = lasso.make_folds(23, 5, seed=4)

    counts = np.bincount(folds, minlength=5)
    assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(folds, lasso.make_folds(23, 5, seed=4))
    assert not np.array_equal(folds, lasso.make_folds(23, 5, seed=5))


def test_check_folds_without_events():
    dataset = SurvivalDataset([1.0, 2.0, 3.0, 4.0], [1, 0, 0, 0], [[0.0], [1.0], [2.0], [3.0]])
    folds = np.array([0, 1, 0, 1])
    with pytest.raises(exceptions.FoldWithoutEventsError) as info:
        lasso.check_folds(dataset, folds, 2)
    assert info.value.fold == 0


@pytest.mark.parametrize('cv_loss', consts.CvLosses.ALL)
def test_cv_lambda_is_reproducible(small_dataset, cv_loss):
    grid = lasso.lambda_grid(small_dataset, count=6)
    first = lasso.cv_lambda(small_dataset, grid, fold_count=4, seed=3, cv_loss=cv_loss)
    second = lasso.cv_lambda(small_dataset, grid, fold_count=4, seed=3, cv_loss=cv_loss)

    assert first.losses.shape == grid.shape
    assert np.all(np.isfinite(first.losses))
    np.testing.assert_array_equal(first.losses, second.losses)
    assert first.chosen_lambda in grid
    assert first.as_dict()['K'] == 4


def test_cv_lambda_parallel_matches_serial(small_dataset):
    grid = lasso.lambda_grid(small_dataset, count=4)
    serial = lasso.cv_lambda(small_dataset, grid, fold_count=3, seed=1)
    parallel = lasso.cv_lambda(small_dataset, grid, fold_count=3, seed=1, n_jobs=2)

    np.testing.assert_allclose(parallel.losses, serial.losses)


def test_cv_lambda_rejects_ascending_grid(small_dataset):
    with pytest.raises(exceptions.SolverError):
        lasso.cv_lambda(small_dataset, [0.01, 0.1], fold_count=3)


def test_cv_curve_ties_choose_larger_lambda():
    curve = lasso.CvCurve([0.3, 0.2, 0.1], [1.0, 0.5, 0.5], 3)
    assert curve.chosen == 1
    assert curve.chosen_lambda == 0.2


@pytest.mark.parametrize('cv_loss', consts.CvLosses.ALL)
def test_cv_lambda_matches_recomputed_losses(small_dataset, cv_loss):
    grid = lasso.lambda_grid(small_dataset, count=5)
    curve = lasso.cv_lambda(small_dataset, grid, fold_count=3, seed=8, cv_loss=cv_loss)

    folds = lasso.make_folds(small_dataset.n, 3, 8)
    full_kernel = CoxKernel(small_dataset)
    losses = np.zeros(grid.shape[0])
    for fold in range(3):
        train = small_dataset.subset(folds != fold)
        train_kernel = CoxKernel(train)
        test_kernel = CoxKernel(small_dataset.subset(folds == fold))
        for position, lam in enumerate(grid):
            beta = lasso.fit_lasso(train, lam).beta
            if cv_loss == consts.CvLosses.VVH:
                losses[position] += small_dataset.n * full_kernel.value(beta) - train.n * train_kernel.value(beta)
            else:
                losses[position] += test_kernel.n * test_kernel.value(beta)

    np.testing.assert_allclose(curve.losses, losses, rtol=1e-5)
    assert losses[curve.chosen] <= losses.min() + 1e-5 * abs(losses.min())
