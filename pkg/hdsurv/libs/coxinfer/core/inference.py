#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the debiased estimator b = beta_hat - Theta score(beta_hat) and the inference built on it:
per coordinate confidence intervals, Wald tests of one linear combination and chi-square tests / confidence
regions for several combinations
"""

from __future__ import print_function, division, absolute_import

import json
import logging

import numpy as np
import pandas as pd
from scipy import stats

from hdsurv.libs.coxinfer.core import consts, exceptions

logger = logging.getLogger(consts.LIB_ID)


def _theta_matrix(theta):
    return np.asarray(getattr(theta, 'matrix', theta), dtype=float)


def normal_quantile(alpha):
    """
    z_{alpha / 2}, the upper alpha / 2 quantile of N(0, 1)
    """

    return float(stats.norm.isf(alpha / 2.0))


def linear_variance(theta, c):
    """
    c.T Theta c, with Theta used as stored (rows are independent solutions, not symmetrized)
    """

    c = np.asarray(c, dtype=float)
    variance = float(c @ _theta_matrix(theta) @ c)
    if not variance > 0:
        raise exceptions.NonPositiveVarianceError('c.T Theta c = {} is not positive'.format(variance))
    return variance


class DebiasedInference(object):
    def __init__(self, b, theta, n, alpha=consts.CI_ALPHA, beta_hat=None):
        self.b = np.asarray(b, dtype=float)
        self.theta = theta
        self.n = int(n)
        self.alpha = float(alpha)
        self.beta_hat = beta_hat

        diagonal = np.diag(_theta_matrix(theta))
        if np.any(diagonal <= 0):
            raise exceptions.NonPositiveVarianceError('Theta has non positive diagonal entries')
        self.std_errors = np.sqrt(diagonal / self.n)
        self.statistics = self.b / self.std_errors
        self.p_values = 2.0 * stats.norm.sf(np.abs(self.statistics))
        half_width = normal_quantile(self.alpha) * self.std_errors
        self.ci_lower = self.b - half_width
        self.ci_upper = self.b + half_width

    def __repr__(self):
        return '[{} - p: {}, n: {}, alpha: {}]'.format(self.__class__.__name__, self.p, self.n, self.alpha)

    @property
    def p(self):
        return self.b.shape[0]

    def coordinate(self, j):
        return {
            'estimate': float(self.b[j]), 'se': float(self.std_errors[j]), 'p_value': float(self.p_values[j]),
            'ci': (float(self.ci_lower[j]), float(self.ci_upper[j]))}


class LinearTest(object):
    def __init__(self, c, a0, estimate, variance, n, alpha):
        self.c = np.asarray(c, dtype=float)
        self.a0 = float(a0)
        self.estimate = float(estimate)
        self.se = float(np.sqrt(variance / n))
        self.alpha = float(alpha)
        self.statistic = (self.estimate - self.a0) / self.se
        self.p_value = float(min(1.0, 2.0 * stats.norm.sf(abs(self.statistic))))
        self.critical_value = normal_quantile(self.alpha)
        self.reject = bool(abs(self.statistic) > self.critical_value)
        half_width = self.critical_value * self.se
        self.ci = (self.estimate - half_width, self.estimate + half_width)

    def __repr__(self):
        return '[{} - T: {:.4f}, p-value: {:.4g}, reject: {}]'.format(
            self.__class__.__name__, self.statistic, self.p_value, self.reject)

    def as_dict(self):
        return {
            'kind': 'wald', 'loading': self.c.tolist(), 'a0': self.a0, 'estimate': self.estimate, 'se': self.se,
            'statistic': self.statistic, 'df': 1, 'p_value': self.p_value, 'reject': self.reject,
            'alpha': self.alpha, 'ci': list(self.ci)}


class MultiTest(object):
    def __init__(self, A, a0, estimate, F, n, alpha):
        self.A = np.asarray(A, dtype=float)
        self.a0 = np.asarray(a0, dtype=float)
        self.estimate = np.asarray(estimate, dtype=float)
        self.F = np.asarray(F, dtype=float)
        self.n = int(n)
        self.alpha = float(alpha)
        self.df = self.A.shape[0]
        self.statistic = self.quadratic_form(self.a0)
        self.p_value = float(stats.chi2.sf(self.statistic, self.df))
        self.critical_value = float(stats.chi2.isf(self.alpha, self.df))
        self.reject = bool(self.statistic > self.critical_value)

    def __repr__(self):
        return '[{} - T: {:.4f}, df: {}, p-value: {:.4g}, reject: {}]'.format(
            self.__class__.__name__, self.statistic, self.df, self.p_value, self.reject)

    def quadratic_form(self, a):
        residual = self.estimate - np.asarray(a, dtype=float)
        return float(max(self.n * residual @ np.linalg.solve(self.F, residual), 0.0))

    def contains(self, a):
        """
        Whether a belongs to the level alpha confidence region for A beta
        :param a: np.ndarray of length l
        :return: bool
        """

        return self.quadratic_form(a) <= self.critical_value

    def as_dict(self):
        return {
            'kind': 'chisq', 'loading': self.A.tolist(), 'a0': self.a0.tolist(), 'estimate': self.estimate.tolist(),
            'statistic': self.statistic, 'df': self.df, 'p_value': self.p_value, 'reject': self.reject,
            'alpha': self.alpha}


# ================================================================================================================
# OPERATIONS
# ================================================================================================================

def debias(beta_hat, theta, gradient):
    """
    b = beta_hat - Theta score(beta_hat)
    :param beta_hat: np.ndarray
    :param theta: ThetaHat or np.ndarray
    :param gradient: np.ndarray, score at beta_hat
    :return: np.ndarray
    """

    beta_hat = np.asarray(beta_hat, dtype=float).reshape(-1)
    gradient = np.asarray(gradient, dtype=float).reshape(-1)
    matrix = _theta_matrix(theta)
    if matrix.shape != (beta_hat.shape[0], beta_hat.shape[0]) or gradient.shape != beta_hat.shape:
        raise exceptions.DimensionMismatchError('beta {}, theta {}, gradient {}'.format(
            beta_hat.shape, matrix.shape, gradient.shape))

    return beta_hat - matrix @ gradient


def infer(beta_hat, theta, gradient, n, alpha=consts.CI_ALPHA):
    """
    Debiases the lasso estimate and computes per coordinate standard errors, p-values and confidence intervals
    :return: DebiasedInference
    """

    asymmetry = theta.asymmetry() if hasattr(theta, 'asymmetry') else 0.0
    if asymmetry > consts.THETA_ASYMMETRY_WARNING:
        logger.warning('Theta is far from symmetric (relative asymmetry {:.3g})'.format(asymmetry))

    return DebiasedInference(debias(beta_hat, theta, gradient), theta, n, alpha=alpha, beta_hat=beta_hat)


def ci_linear(b, theta, n, c, alpha=consts.CI_ALPHA):
    """
    [c.T b -+ z_{alpha/2} sqrt(c.T Theta c / n)]
    :return: tuple(float, float)
    """

    c = np.asarray(c, dtype=float)
    center = float(c @ np.asarray(b, dtype=float))
    half_width = normal_quantile(alpha) * np.sqrt(linear_variance(theta, c) / n)
    return center - half_width, center + half_width


def wald_test(b, theta, n, c, a0=0.0, alpha=consts.CI_ALPHA):
    """
    Tests c.T beta = a0 with T = sqrt(n) (c.T b - a0) / sqrt(c.T Theta c); rejects when |T| > z_{alpha/2}
    :return: LinearTest
    """

    c = np.asarray(c, dtype=float)
    return LinearTest(c, a0, c @ np.asarray(b, dtype=float), linear_variance(theta, c), n, alpha)


def chisq_test(b, theta, n, A, a0=None, alpha=consts.CI_ALPHA):
    """
    Tests A beta = a0 with T' = n (A b - a0).T F^-1 (A b - a0), F = A Theta A.T, against chi-square(l)
    :return: MultiTest
    """

    A = np.atleast_2d(np.asarray(A, dtype=float))
    rows = A.shape[0]
    a0 = np.zeros(rows) if a0 is None else np.asarray(a0, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float)
    if A.shape[1] != b.shape[0] or a0.shape[0] != rows:
        raise exceptions.DimensionMismatchError('A {}, b {}, a0 {}'.format(A.shape, b.shape, a0.shape))
    if np.linalg.matrix_rank(A) < rows:
        raise exceptions.RankDeficientError('Loading matrix does not have full row rank')

    F = A @ _theta_matrix(theta) @ A.T
    smallest = np.linalg.eigvalsh(0.5 * (F + F.T))[0]
    if not smallest > consts.NON_PD_RELATIVE_EIGENVALUE * np.linalg.norm(F, 2):
        raise exceptions.NonPdFError('A Theta A.T is not positive definite (smallest eigenvalue {})'.format(smallest))

    return MultiTest(A, a0, A @ b, F, n, alpha)


class CoefficientTable(object):
    COLUMNS = ('label', 'estimate', 'se', 'statistic', 'p_value', 'ci_lower', 'ci_upper', 'hazard_ratio',
               'hr_lower', 'hr_upper')

    def __init__(self, rows, alpha):
        self.rows = list(rows)
        self.alpha = alpha

    def __repr__(self):
        return '[{} - rows: {}]'.format(self.__class__.__name__, len(self.rows))

    def __len__(self):
        return len(self.rows)

    def sorted_by_p_value(self):
        return CoefficientTable(sorted(self.rows, key=lambda row: row['p_value']), self.alpha)

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=list(self.COLUMNS))

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format=consts.FLOAT_FORMAT)

    def to_json(self):
        return json.dumps({'alpha': self.alpha, 'rows': self.rows})

    @classmethod
    def from_json(cls, text):
        document = json.loads(text)
        return cls(document['rows'], document['alpha'])


def wald_table(labels, estimates, std_errors, alpha=consts.CI_ALPHA, scaling=None):
    """
    Coefficient table from estimates and standard errors on the model scale: z statistics, two-sided p-values,
    confidence intervals and hazard ratios, mapped to the original covariate scale when scaling is given
    :param labels: list(str), length p
    :param estimates: np.ndarray
    :param std_errors: np.ndarray, positive
    :param alpha: float
    :param scaling: ScalingInfo or None
    :return: CoefficientTable
    """

    labels = list(labels)
    estimates = np.asarray(estimates, dtype=float)
    std_errors = np.asarray(std_errors, dtype=float)
    if len(labels) != estimates.shape[0] or std_errors.shape != estimates.shape:
        raise exceptions.DimensionMismatchError('Expected {} labels and standard errors, got {} and {}'.format(
            estimates.shape[0], len(labels), std_errors.shape[0]))
    if np.any(~(std_errors > 0)):
        raise exceptions.NonPositiveVarianceError('Standard errors must be positive')

    statistics = estimates / std_errors
    p_values = 2.0 * stats.norm.sf(np.abs(statistics))
    half_width = normal_quantile(alpha) * std_errors
    lower, upper = estimates - half_width, estimates + half_width
    if scaling is not None:
        estimates, std_errors = scaling.to_original(estimates), scaling.to_original(std_errors)
        lower, upper = scaling.to_original(lower), scaling.to_original(upper)

    rows = list()
    for j, label in enumerate(labels):
        rows.append({
            'label': label,
            'estimate': float(estimates[j]),
            'se': float(std_errors[j]),
            'statistic': float(statistics[j]),
            'p_value': float(p_values[j]),
            'ci_lower': float(lower[j]),
            'ci_upper': float(upper[j]),
            'hazard_ratio': float(np.exp(estimates[j])),
            'hr_lower': float(np.exp(lower[j])),
            'hr_upper': float(np.exp(upper[j])),
        })

    return CoefficientTable(rows, alpha)


def report_table(inference, labels, scaling=None):
    """
    Coefficient table (label, estimate, SE, p-value, CI, hazard ratio) of a debiased fit
    :param inference: DebiasedInference
    :param labels: list(str), length p
    :param scaling: ScalingInfo or None
    :return: CoefficientTable
    """

    return wald_table(labels, inference.b, inference.std_errors, alpha=inference.alpha, scaling=scaling)
