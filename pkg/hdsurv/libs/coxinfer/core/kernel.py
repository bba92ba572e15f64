#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the Cox negative log partial likelihood, its derivatives, the risk-set moment functions
and the Sigma-hat matrix used to estimate the inverse information matrix.

All risk-set sums are computed in one backward pass over sorted times. Exponentials are evaluated with a shift
that is re-based whenever the running maximum of the linear predictor grows by more than consts.SHIFT_WINDOW,
so neither overflow nor total underflow of a risk-set sum can happen.
"""

from __future__ import print_function, division, absolute_import

import logging

import numpy as np

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import data as data_model

logger = logging.getLogger(consts.LIB_ID)


class MomentSet(object):
    """
    Risk-set moments mu0, mu1, mu2 at time t and the weighted average covariate vector eta = mu1 / mu0
    """

    def __init__(self, mu0, mu1, mu2, at_time, at_beta):
        self.mu0 = float(mu0)
        self.mu1 = np.asarray(mu1, dtype=float)
        self.mu2 = np.asarray(mu2, dtype=float)
        self.eta = self.mu1 / self.mu0
        self.at_time = at_time
        self.at_beta = np.asarray(at_beta, dtype=float)

    def __repr__(self):
        return '[{} - t: {}, mu0: {}]'.format(self.__class__.__name__, self.at_time, self.mu0)


class KernelEval(object):
    def __init__(self, value, gradient=None, hessian=None):
        self.value = value
        self.gradient = gradient
        self.hessian = hessian

    def __repr__(self):
        return '[{} - value: {}]'.format(self.__class__.__name__, self.value)


class SigmaHat(object):
    def __init__(self, matrix, at_beta):
        self.matrix = np.asarray(matrix, dtype=float)
        self.at_beta = np.asarray(at_beta, dtype=float)

    def __repr__(self):
        return '[{} - p: {}]'.format(self.__class__.__name__, self.matrix.shape[0])

    @property
    def p(self):
        return self.matrix.shape[0]


class CoxKernel(object):
    """
    Evaluates the negative log partial likelihood l_n and its derivatives for a fixed dataset (Breslow ties).
    Sorting and tie grouping are computed once and shared by every evaluation.
    """

    def __init__(self, dataset, index=None):
        self._dataset = dataset
        self._index = index if index is not None else data_model.risk_index(dataset)

        order = self._index.order
        self._x = dataset.covariates[order]
        self._status = dataset.status[order]
        self._events = self._index.event_positions
        self._group_start = self._index.group_start
        # risk set of every event, as the sorted position where its tie group starts
        self._event_start = self._group_start[self._events]

    def __repr__(self):
        return '[{} - {}]'.format(self.__class__.__name__, self._dataset)

    @property
    def dataset(self):
        return self._dataset

    @property
    def index(self):
        return self._index

    @property
    def n(self):
        return self._dataset.n

    @property
    def p(self):
        return self._dataset.p

    # ============================================================================================================
    # BASE
    # ============================================================================================================

    def value(self, beta):
        """
        Returns l_n(beta), the negative of the averaged log partial likelihood
        :param beta: np.ndarray
        :return: float
        """

        eta = self._linear_predictor(beta)
        log_s0 = self._suffix_log_s0(eta)

        return self._value_from(eta, log_s0)

    def score(self, beta):
        return self.evaluate(beta, order=1).gradient

    def hessian(self, beta):
        return self.evaluate(beta, order=2).hessian

    def evaluate(self, beta, order=2):
        """
        Evaluates l_n and its first `order` derivatives in a single pass
        :param beta: np.ndarray
        :param order: int, 0, 1 or 2
        :return: KernelEval
        """

        eta = self._linear_predictor(beta)
        if order == 0:
            return KernelEval(self._value_from(eta, self._suffix_log_s0(eta)))

        log_s0, eta_bar = self._suffix_sums(eta)
        value = self._value_from(eta, log_s0)
        event_eta_bar = eta_bar[self._event_start]
        gradient = -(self._x[self._events] - event_eta_bar).sum(axis=0) / self.n
        if order == 1:
            return KernelEval(value, gradient=gradient)

        weights = self._cumulative_event_weights(eta, log_s0)
        hessian = (self._x.T * weights) @ self._x - event_eta_bar.T @ event_eta_bar
        hessian = 0.5 * (hessian + hessian.T) / self.n

        return KernelEval(value, gradient=gradient, hessian=hessian)

    def sigma_hat(self, beta_hat):
        """
        Returns n^-1 sum_i delta_i {X_i - eta_n(Y_i; beta_hat)}^{x2}
        :param beta_hat: np.ndarray
        :return: SigmaHat
        """

        if not self._events.size:
            return SigmaHat(np.zeros((self.p, self.p)), beta_hat)

        eta = self._linear_predictor(beta_hat)
        _, eta_bar = self._suffix_sums(eta)
        residuals = self._x[self._events] - eta_bar[self._event_start]
        matrix = residuals.T @ residuals / self.n

        return SigmaHat(0.5 * (matrix + matrix.T), beta_hat)

    def moments(self, beta, t):
        """
        Evaluates mu_r(t; beta) = n^-1 sum_j 1(Y_j >= t) X_j^{xr} exp(X_j^T beta) for r = 0, 1, 2
        :param beta: np.ndarray
        :param t: float
        :return: MomentSet
        """

        at_risk = self._dataset.times >= t
        if not np.any(at_risk):
            raise exceptions.EmptyRiskSetError('Risk set at time {} is empty'.format(t))

        x = self._dataset.covariates[at_risk]
        eta = self._linear_predictor_of(x, beta)
        shift = eta.max()
        weights = np.exp(eta - shift)
        scale = np.exp(shift) / self.n

        return MomentSet(
            weights.sum() * scale, (x.T @ weights) * scale, ((x.T * weights) @ x) * scale, at_time=t, at_beta=beta)

    # ============================================================================================================
    # INTERNAL
    # ============================================================================================================

    def _linear_predictor(self, beta):
        return self._linear_predictor_of(self._x, beta)

    def _linear_predictor_of(self, x, beta):
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.shape[0] != self.p:
            raise exceptions.DimensionMismatchError('beta has length {}, expected {}'.format(beta.shape[0], self.p))
        eta = x @ beta if self.p else np.zeros(x.shape[0])
        if not np.all(np.isfinite(eta)):
            raise exceptions.NonFiniteLinearPredictorError('Linear predictor is not finite')
        return eta

    def _value_from(self, eta, log_s0):
        if not self._events.size:
            return 0.0
        log_mean = log_s0[self._event_start] - np.log(self.n)
        return float(-np.sum(eta[self._events] - log_mean) / self.n)

    def _suffix_log_s0(self, eta):
        """
        log sum_{k >= position} exp(eta_k) for every sorted position
        """

        return np.logaddexp.accumulate(eta[::-1])[::-1]

    def _suffix_sums(self, eta):
        """
        Returns log S0 and the weighted covariate average S1 / S0 over every suffix of the sorted sample
        """

        n = eta.shape[0]
        reverse_eta = eta[::-1]
        reverse_x = self._x[::-1]
        running_max = np.maximum.accumulate(reverse_eta)
        windows = np.floor((running_max - running_max[0]) / consts.SHIFT_WINDOW)
        starts = np.flatnonzero(np.r_[True, windows[1:] != windows[:-1]])
        ends = np.r_[starts[1:], n]

        log_s0 = np.empty(n)
        eta_bar = np.empty((n, self.p))
        carry0 = 0.0
        carry1 = np.zeros(self.p)
        previous_shift = None
        for start, end in zip(starts, ends):
            shift = running_max[start]
            if previous_shift is not None:
                rescale = np.exp(previous_shift - shift)
                carry0 *= rescale
                carry1 = carry1 * rescale
            weights = np.exp(reverse_eta[start:end] - shift)
            s0 = carry0 + np.cumsum(weights)
            s1 = carry1 + np.cumsum(reverse_x[start:end] * weights[:, None], axis=0)
            log_s0[start:end] = np.log(s0) + shift
            eta_bar[start:end] = s1 / s0[:, None]
            carry0 = s0[-1]
            carry1 = s1[-1]
            previous_shift = shift

        return log_s0[::-1], eta_bar[::-1]

    def _cumulative_event_weights(self, eta, log_s0):
        """
        a_k = sum over events i whose risk set contains position k of exp(eta_k) / S0(Y_i); every term is <= 1
        """

        n = eta.shape[0]
        inverse_s0 = np.full(n, -np.inf)
        # several events may share a start position (ties): accumulate them in log space
        np.logaddexp.at(inverse_s0, self._event_start, -log_s0[self._event_start])
        log_cumulative = np.logaddexp.accumulate(inverse_s0)

        with np.errstate(under='ignore'):
            return np.exp(eta + log_cumulative)


# ================================================================================================================
# OPERATIONS
# ================================================================================================================

def _kernel(dataset, index):
    return CoxKernel(dataset, index=index)


def moments(dataset, index, beta, t):
    return _kernel(dataset, index).moments(beta, t)


def neg_log_partial_likelihood(dataset, index, beta):
    return _kernel(dataset, index).value(beta)


def score(dataset, index, beta):
    return _kernel(dataset, index).score(beta)


def hessian(dataset, index, beta):
    return _kernel(dataset, index).hessian(beta)


def sigma_hat(dataset, index, beta_hat):
    return _kernel(dataset, index).sigma_hat(beta_hat)
