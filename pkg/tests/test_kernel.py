#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains tests for the Cox partial likelihood kernel
"""

import numpy as np
import pytest
from scipy.special import logsumexp

from hdsurv.libs.coxinfer.core import exceptions
from hdsurv.libs.coxinfer.core import kernel
from hdsurv.libs.coxinfer.core.data import SurvivalDataset
from hdsurv.libs.coxinfer.core.kernel import CoxKernel

from conftest import make_dataset


def breslow_value(dataset, beta):
    """
    Direct O(n^2) evaluation of the Breslow negative log partial likelihood
    """

    eta = dataset.covariates @ beta
    total = 0.0
    for i in np.flatnonzero(dataset.status == 1):
        at_risk = dataset.times >= dataset.times[i]
        total += eta[i] - (logsumexp(eta[at_risk]) - np.log(dataset.n))
    return -total / dataset.n


def breslow_sigma(dataset, beta):
    eta = dataset.covariates @ beta
    p = dataset.p
    matrix = np.zeros((p, p))
    for i in np.flatnonzero(dataset.status == 1):
        at_risk = dataset.times >= dataset.times[i]
        weights = np.exp(eta[at_risk] - eta[at_risk].max())
        mean = weights @ dataset.covariates[at_risk] / weights.sum()
        residual = dataset.covariates[i] - mean
        matrix += np.outer(residual, residual)
    return matrix / dataset.n


def finite_differences(cox, beta, step=1e-6):
    """
    Central differences of the value (for the score) and of the score (for the Hessian)
    """

    p = beta.shape[0]
    gradient = np.empty(p)
    hessian = np.empty((p, p))
    for j in range(p):
        shift = np.zeros(p)
        shift[j] = step
        gradient[j] = (cox.value(beta + shift) - cox.value(beta - shift)) / (2 * step)
        hessian[:, j] = (cox.score(beta + shift) - cox.score(beta - shift)) / (2 * step)
    return gradient, hessian


def test_hand_dataset_values(hand_dataset):
    cox = CoxKernel(hand_dataset)
    zero = np.zeros(1)

    assert cox.value(zero) == pytest.approx(np.log(2.0 / 3.0) / 3.0)
    np.testing.assert_allclose(cox.score(zero), [-0.5])
    np.testing.assert_allclose(cox.hessian(zero), [[11.0 / 36.0]])
    np.testing.assert_allclose(cox.sigma_hat(zero).matrix, [[5.0 / 12.0]])


def test_module_functions_match_kernel(hand_dataset):
    beta = np.array([0.3])
    cox = CoxKernel(hand_dataset)

    assert kernel.neg_log_partial_likelihood(hand_dataset, None, beta) == pytest.approx(cox.value(beta))
    np.testing.assert_allclose(kernel.score(hand_dataset, None, beta), cox.score(beta))
    np.testing.assert_allclose(kernel.hessian(hand_dataset, None, beta), cox.hessian(beta))
    np.testing.assert_allclose(kernel.sigma_hat(hand_dataset, None, beta).matrix, cox.sigma_hat(beta).matrix)


def test_value_matches_direct_evaluation_with_ties(tied_dataset):
    beta = np.array([0.4, -0.2, 0.1])
    cox = CoxKernel(tied_dataset)

    assert len(set(tied_dataset.times)) < tied_dataset.n
    assert cox.value(beta) == pytest.approx(breslow_value(tied_dataset, beta), rel=1e-12)
    np.testing.assert_allclose(cox.sigma_hat(beta).matrix, breslow_sigma(tied_dataset, beta), rtol=1e-10, atol=1e-14)


def test_derivatives_match_finite_differences(tied_dataset):
    cox = CoxKernel(tied_dataset)
    beta = np.array([0.2, 0.5, -0.3])
    evaluation = cox.evaluate(beta)
    numeric_gradient, numeric_hessian = finite_differences(cox, beta)

    np.testing.assert_allclose(evaluation.gradient, numeric_gradient, atol=1e-7)
    np.testing.assert_allclose(evaluation.hessian, numeric_hessian, atol=1e-7)
    np.testing.assert_allclose(evaluation.hessian, evaluation.hessian.T)
    assert np.linalg.eigvalsh(evaluation.hessian)[0] >= -1e-12


@pytest.mark.parametrize('seed', range(50))
def test_derivatives_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(5, 61)), int(rng.integers(1, 11))
    dataset = make_dataset(n, p, seed=seed, round_times=int(rng.choice([1, 2, 8])))
    cox = CoxKernel(dataset)
    beta = 0.3 * rng.standard_normal(p)
    evaluation = cox.evaluate(beta)
    numeric_gradient, numeric_hessian = finite_differences(cox, beta)

    np.testing.assert_allclose(evaluation.gradient, numeric_gradient, atol=1e-6)
    np.testing.assert_allclose(evaluation.hessian, numeric_hessian, atol=1e-6)
    assert np.linalg.eigvalsh(evaluation.hessian)[0] >= -1e-10
    assert np.linalg.eigvalsh(cox.sigma_hat(beta).matrix)[0] >= -1e-10


def test_large_linear_predictors_stay_finite():
    dataset = SurvivalDataset([1.0, 2.0, 3.0, 4.0], [1, 1, 1, 0], [[1.0], [2.0], [3.0], [-2.0]])
    cox = CoxKernel(dataset)
    beta = np.array([400.0])

    evaluation = cox.evaluate(beta)
    assert np.isfinite(evaluation.value)
    assert evaluation.value == pytest.approx(breslow_value(dataset, beta), rel=1e-10)
    assert np.all(np.isfinite(evaluation.gradient))
    assert np.all(np.isfinite(evaluation.hessian))


def test_sigma_hat_is_positive_semidefinite():
    dataset = make_dataset(80, 6, beta=[0.5, 0.0, 0.0, -0.5, 0.0, 0.0], seed=9)
    matrix = CoxKernel(dataset).sigma_hat(np.full(6, 0.1)).matrix

    np.testing.assert_allclose(matrix, matrix.T)
    assert np.linalg.eigvalsh(matrix)[0] >= -1e-12


def test_no_events_gives_zero_value():
    dataset = SurvivalDataset([1.0, 2.0], [0, 0], [[1.0], [2.0]])
    cox = CoxKernel(dataset)

    assert cox.value(np.zeros(1)) == 0.0
    np.testing.assert_array_equal(cox.sigma_hat(np.zeros(1)).matrix, [[0.0]])


def test_moments(hand_dataset):
    moments = CoxKernel(hand_dataset).moments(np.zeros(1), 2.0)

    assert moments.mu0 == pytest.approx(2.0 / 3.0)
    np.testing.assert_allclose(moments.mu1, [-1.0 / 3.0])
    np.testing.assert_allclose(moments.mu2, [[1.0 / 3.0]])


def test_moments_empty_risk_set(hand_dataset):
    with pytest.raises(exceptions.EmptyRiskSetError):
        CoxKernel(hand_dataset).moments(np.zeros(1), 10.0)


def test_beta_dimension_mismatch(hand_dataset):
    with pytest.raises(exceptions.DimensionMismatchError):
        CoxKernel(hand_dataset).value(np.zeros(2))


def test_non_finite_linear_predictor(hand_dataset):
    with pytest.raises(exceptions.NonFiniteLinearPredictorError):
        CoxKernel(hand_dataset).value(np.array([np.inf]))
