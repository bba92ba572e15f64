#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains tests for the inverse information estimate and gamma cross-validation
"""

import numpy as np
import pytest

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import lasso
from hdsurv.libs.coxinfer.core import theta as theta_utils
from hdsurv.libs.coxinfer.core.kernel import CoxKernel


@pytest.fixture
def sigma():
    rng = np.random.default_rng(7)
    factor = rng.standard_normal((8, 8))
    return factor @ factor.T / 8.0 + 0.2 * np.eye(8)


def test_zero_gamma_gives_inverse(sigma):
    theta = theta_utils.estimate_theta(sigma, 0.0)

    np.testing.assert_allclose(theta.matrix @ sigma, np.eye(8), atol=1e-8)
    assert theta.ridge == 0.0
    assert theta.asymmetry() < 1e-8


def test_rows_satisfy_box_constraint(wide_dataset):
    fit = lasso.fit_lasso(wide_dataset, 0.2 * lasso.lambda_max(wide_dataset))
    sigma_hat = CoxKernel(wide_dataset).sigma_hat(fit.beta)
    theta = theta_utils.estimate_theta(sigma_hat, 0.1)

    assert theta.p == wide_dataset.p
    assert np.all(theta.row_violations() <= 1e-8)
    assert np.all(theta.row_violations(sigma_hat) <= 1e-8)
    assert np.all(theta.diagonal >= 0)
    assert theta.max_row_kkt < 1e-8
    assert theta.sidecar() == {'gamma': 0.1, 'ridge': 0.0, 'max_row_kkt': theta.max_row_kkt}


def test_parallel_rows_match_serial(sigma):
    serial = theta_utils.estimate_theta(sigma, 0.05)
    parallel = theta_utils.estimate_theta(sigma, 0.05, n_jobs=2)

    np.testing.assert_array_equal(parallel.matrix, serial.matrix)


def test_theta_is_read_only(sigma):
    theta = theta_utils.estimate_theta(sigma, 0.0)
    with pytest.raises(ValueError):
        theta.matrix[0, 0] = 1.0


def test_negative_gamma(sigma):
    with pytest.raises(exceptions.QpError):
        theta_utils.estimate_theta(sigma, -0.1)


def test_lift_sigma_on_singular_matrix():
    lifted, ridge = theta_utils.lift_sigma(np.ones((3, 3)))

    assert ridge == pytest.approx(consts.RIDGE_SCALE)
    np.testing.assert_allclose(lifted, np.ones((3, 3)) + ridge * np.eye(3))
    assert np.linalg.eigvalsh(lifted)[0] > 0


def test_lift_sigma_keeps_positive_definite_matrix(sigma):
    lifted, ridge = theta_utils.lift_sigma(sigma)

    assert ridge == 0.0
    assert lifted is sigma or np.array_equal(lifted, sigma)


def test_asymmetry():
    theta = theta_utils.ThetaHat([[1.0, 0.5], [0.0, 1.0]], 0.1)
    assert theta.asymmetry() == pytest.approx(0.5)


def test_threshold_cutoff():
    assert theta_utils.threshold_cutoff(2, 0.1) == pytest.approx(1.959964, abs=1e-6)


def test_hard_threshold():
    kept = theta_utils.hard_threshold([3.0, 0.01], np.eye(2), 100, alpha=0.1)
    np.testing.assert_array_equal(kept, [3.0, 0.0])


def test_hard_threshold_with_diagonal_denominator():
    theta = np.diag([4.0, 4.0])
    # statistics are 10 and 3 over sqrt(Theta_jj), 5 and 1.5 over Theta_jj; the cutoff is 1.96
    b = [2.0, 0.6]
    np.testing.assert_array_equal(
        theta_utils.hard_threshold(b, theta, 100, alpha=0.1, denominator=consts.ThresholdDenominators.DIAG),
        [2.0, 0.0])
    np.testing.assert_array_equal(theta_utils.hard_threshold(b, theta, 100, alpha=0.1), [2.0, 0.6])


def test_standardized_statistics_non_positive_diagonal():
    theta = np.diag([1.0, 0.0])
    with pytest.raises(exceptions.NonPositiveDiagonalError):
        theta_utils.standardized_statistics([1.0, 1.0], theta, 4)
    np.testing.assert_allclose(theta_utils.standardized_statistics([1.0, 1.0], theta, 4, strict=False), [2.0, 0.0])


def test_unknown_denominator():
    with pytest.raises(exceptions.InferenceError):
        theta_utils.hard_threshold([1.0], np.eye(1), 10, denominator='rank')


def test_default_gamma_grid():
    grid = theta_utils.default_gamma_grid(500, 100)
    base = np.sqrt(np.log(100) / 500)

    assert np.all(np.diff(grid) > 0)
    np.testing.assert_allclose(grid, np.asarray(consts.GAMMA_MULTIPLIERS) * base)


def test_cv_gamma_is_reproducible(wide_dataset):
    lam = 0.2 * lasso.lambda_max(wide_dataset)
    grid = theta_utils.default_gamma_grid(wide_dataset.n, wide_dataset.p)[:5]
    first = theta_utils.cv_gamma(wide_dataset, grid, lam, fold_count=3, seed=2)
    second = theta_utils.cv_gamma(wide_dataset, grid, lam, fold_count=3, seed=2)

    assert first.losses.shape == grid.shape
    assert np.all(np.isfinite(first.losses))
    np.testing.assert_array_equal(first.losses, second.losses)
    assert first.chosen_gamma in grid
    assert first.as_dict()['alpha'] == consts.THRESHOLD_ALPHA


def test_cv_gamma_with_vvh_loss_and_custom_sigma(wide_dataset):
    lam = 0.2 * lasso.lambda_max(wide_dataset)
    calls = list()

    def sigma_builder(dataset, beta):
        calls.append(dataset.n)
        return CoxKernel(dataset).hessian(beta)

    curve = theta_utils.cv_gamma(
        wide_dataset, [0.1, 0.2], lam, fold_count=3, seed=2, cv_loss=consts.CvLosses.VVH,
        sigma_builder=sigma_builder)

    assert len(calls) == 3
    assert np.all(np.isfinite(curve.losses))


def test_cv_gamma_rejects_descending_grid(wide_dataset):
    with pytest.raises(exceptions.ConfigError):
        theta_utils.cv_gamma(wide_dataset, [0.2, 0.1], 0.05)


def test_gamma_curve_ties_choose_smaller_gamma():
    curve = theta_utils.GammaCurve([0.1, 0.2, 0.3], [2.0, 1.0, 1.0], 5, 0.1)
    assert curve.chosen_gamma == 0.2


@pytest.mark.parametrize('denominator', consts.ThresholdDenominators.ALL)
def test_hard_threshold_is_idempotent(sigma, denominator):
    b = np.where(np.arange(8) % 2, 0.01, -2.0)
    theta = theta_utils.estimate_theta(sigma, 0.0)
    once = theta_utils.hard_threshold(b, theta, 50, denominator=denominator)
    twice = theta_utils.hard_threshold(once, theta, 50, denominator=denominator)

    np.testing.assert_array_equal(twice, once)
    assert np.any(once == 0.0) and np.any(once != 0.0)


def test_row_objective_does_not_increase_with_gamma(sigma):
    objectives = list()
    for gamma in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5]:
        matrix = theta_utils.estimate_theta(sigma, gamma).matrix
        objectives.append(0.5 * np.einsum('ij,jk,ik->i', matrix, sigma, matrix))

    assert np.all(np.diff(np.array(objectives), axis=0) <= 1e-10)


def test_cv_gamma_matches_recomputed_losses(wide_dataset):
    lam = 0.2 * lasso.lambda_max(wide_dataset)
    grid = [0.05, 0.1, 0.2, 0.4]
    curve = theta_utils.cv_gamma(wide_dataset, grid, lam, fold_count=3, seed=6)

    folds = lasso.make_folds(wide_dataset.n, 3, 6)
    losses = np.zeros(len(grid))
    for fold in range(3):
        train = wide_dataset.subset(folds != fold)
        test = wide_dataset.subset(folds == fold)
        fit = lasso.fit_lasso(train, lam)
        train_kernel = CoxKernel(train)
        sigma_hat = train_kernel.sigma_hat(fit.beta)
        for position, gamma in enumerate(grid):
            theta = theta_utils.estimate_theta(sigma_hat, gamma)
            b = fit.beta - theta.matrix @ train_kernel.score(fit.beta)
            kept = theta_utils.hard_threshold(b, theta, train.n, strict=False)
            losses[position] += test.n * CoxKernel(test).value(kept)

    np.testing.assert_allclose(curve.losses, losses, rtol=1e-8)
    assert curve.chosen == int(np.argmin(losses))
