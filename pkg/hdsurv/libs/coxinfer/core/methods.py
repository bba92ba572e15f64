#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the estimation method interface used by the simulation harness, the built-in methods and the
lasso -> Sigma-hat -> Theta -> debias pipeline shared with the command line
"""

from __future__ import print_function, division, absolute_import

import abc
import logging

import numpy as np

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import inference, lasso, theta as theta_utils
from hdsurv.libs.coxinfer.core.factory import MethodFactory
from hdsurv.libs.coxinfer.core.kernel import CoxKernel

logger = logging.getLogger(consts.LIB_ID)


class MethodContext(object):
    """
    Tuning settings shared by every method fit on one dataset. The lasso fit (and its cross-validated lambda) is
    cached so several methods on the same replication reuse it
    """

    def __init__(
            self, alpha=consts.CI_ALPHA, lam=None, lambda_folds=consts.LAMBDA_FOLDS, gamma=None,
            gamma_folds=consts.GAMMA_FOLDS, gamma_grid=None, threshold_alpha=consts.THRESHOLD_ALPHA,
            denominator=consts.ThresholdDenominators.SQRT_DIAG, cv_loss=consts.CvLosses.HELDOUT,
            seed=consts.DEFAULT_SEED, support=None, n_jobs=1):
        self.alpha = alpha
        self.lam = lam
        self.lambda_folds = lambda_folds
        self.gamma = gamma
        self.gamma_folds = gamma_folds
        self.gamma_grid = gamma_grid
        self.threshold_alpha = threshold_alpha
        self.denominator = denominator
        self.cv_loss = cv_loss
        self.seed = seed
        self.support = support
        self.n_jobs = n_jobs

        self._lasso = dict()

    def __repr__(self):
        return '[{} - lambda: {}, gamma: {}, seed: {}]'.format(self.__class__.__name__, self.lam, self.gamma, self.seed)

    def lasso_run(self, dataset, kernel=None):
        """
        Returns the lasso fit on the dataset, choosing lambda by cross-validation when none is fixed
        :return: tuple(CoxFit, CvCurve or None)
        """

        key = id(dataset)
        if key in self._lasso:
            return self._lasso[key][1:]

        kernel = kernel or CoxKernel(dataset)
        curve = None
        lam = self.lam
        if lam is None:
            grid = lasso.lambda_grid(dataset, kernel=kernel)
            curve = lasso.cv_lambda(
                dataset, grid, fold_count=self.lambda_folds, seed=self.seed, cv_loss=self.cv_loss, n_jobs=self.n_jobs)
            lam = curve.chosen_lambda
        fit = lasso.fit_lasso(dataset, lam, kernel=kernel)
        # the dataset is kept referenced so its id cannot be reused while cached
        self._lasso[key] = (dataset, fit, curve)

        return fit, curve


class MethodResult(object):
    """
    Point estimate of beta plus a matrix V with Var(c.T beta_hat) = c.T V c (None when the method has no
    model-based variance)
    """

    def __init__(self, label, estimates, variance=None, alpha=consts.CI_ALPHA, details=None):
        self.label = label
        self.estimates = np.asarray(estimates, dtype=float)
        self.variance = None if variance is None else np.asarray(variance, dtype=float)
        self.alpha = alpha
        self.details = details or dict()

    def __repr__(self):
        return '[{} - {}]'.format(self.__class__.__name__, self.label)

    def linear(self, c):
        """
        Estimate, SE and confidence interval of c.T beta. SE and interval are NaN without a positive variance
        :param c: np.ndarray
        :return: tuple(float, float, float, float)
        """

        c = np.asarray(c, dtype=float)
        estimate = float(c @ self.estimates)
        variance = float(c @ self.variance @ c) if self.variance is not None else np.nan
        if not variance > 0:
            return estimate, np.nan, np.nan, np.nan
        se = float(np.sqrt(variance))
        half_width = inference.normal_quantile(self.alpha) * se
        return estimate, se, estimate - half_width, estimate + half_width

    def wald(self, c, a0=0.0):
        """
        Wald test of c.T beta = a0 against the model-based variance
        :return: LinearTest or None when the method has no usable variance
        """

        if self.variance is None:
            return None
        try:
            return inference.wald_test(self.estimates, self.variance, 1, c, a0=a0, alpha=self.alpha)
        except exceptions.InferenceError:
            return None

    def joint(self, A, a0=None):
        """
        Chi-square test of A beta = a0 against the model-based variance
        :return: MultiTest or None when the method has no usable variance
        """

        if self.variance is None:
            return None
        try:
            return inference.chisq_test(self.estimates, self.variance, 1, A, a0=a0, alpha=self.alpha)
        except exceptions.InferenceError:
            return None


class DebiasedRun(object):
    """
    Every intermediate of one debiased lasso analysis
    """

    def __init__(self, fit, lambda_curve, sigma, theta, gamma_curve, gradient, result):
        self.fit = fit
        self.lambda_curve = lambda_curve
        self.sigma = sigma
        self.theta = theta
        self.gamma_curve = gamma_curve
        self.gradient = gradient
        self.inference = result

    def __repr__(self):
        return '[{} - lambda: {}, gamma: {}]'.format(self.__class__.__name__, self.fit.lam, self.theta.gamma)


def run_debiased(dataset, context, gamma=None, kernel=None):
    """
    lasso fit -> Sigma-hat at the lasso estimate -> gamma (fixed or cross-validated) -> Theta -> debiased inference
    :param dataset: SurvivalDataset
    :param context: MethodContext
    :param gamma: float or None, overrides context.gamma
    :param kernel: CoxKernel or None
    :return: DebiasedRun
    """

    kernel = kernel or CoxKernel(dataset)
    fit, lambda_curve = context.lasso_run(dataset, kernel=kernel)
    sigma = kernel.sigma_hat(fit.beta)
    gradient = kernel.score(fit.beta)

    gamma = context.gamma if gamma is None else gamma
    gamma_curve = None
    if gamma is None:
        grid = context.gamma_grid
        if grid is None:
            grid = theta_utils.default_gamma_grid(dataset.n, dataset.p)
        gamma_curve = theta_utils.cv_gamma(
            dataset, grid, fit.lam, fold_count=context.gamma_folds, alpha=context.threshold_alpha, seed=context.seed,
            denominator=context.denominator, cv_loss=context.cv_loss, n_jobs=context.n_jobs)
        gamma = gamma_curve.chosen_gamma

    theta = theta_utils.estimate_theta(sigma, gamma, n_jobs=context.n_jobs)
    result = inference.infer(fit.beta, theta, gradient, dataset.n, alpha=context.alpha)

    return DebiasedRun(fit, lambda_curve, sigma, theta, gamma_curve, gradient, result)


# ================================================================================================================
# METHODS
# ================================================================================================================

class EstimationMethod(abc.ABC):
    """
    Base class of every method the simulation harness can compare. Subclasses set ID and implement fit
    """

    ID = None

    def __init__(self, **options):
        self._options = options

    def __repr__(self):
        return '[{} - {}]'.format(self.__class__.__name__, self.label)

    @property
    def label(self):
        return self.ID

    @property
    def options(self):
        return dict(self._options)

    @abc.abstractmethod
    def fit(self, dataset, context):
        """
        Fits the method on the dataset
        :param dataset: SurvivalDataset
        :param context: MethodContext
        :return: MethodResult
        """

        pass


class QpDebiasMethod(EstimationMethod):
    ID = consts.Methods.QP_DEBIAS

    @property
    def label(self):
        gamma = self._options.get('gamma')
        if gamma is None:
            return self.ID
        return '{}[gamma={:g}]'.format(self.ID, gamma)

    def fit(self, dataset, context):
        run = run_debiased(dataset, context, gamma=self._options.get('gamma'))
        return MethodResult(
            self.label, run.inference.b, run.theta.matrix / dataset.n, alpha=context.alpha,
            details={'lambda': run.fit.lam, 'gamma': run.theta.gamma, 'theta': run.theta, 'gradient': run.gradient,
                     'beta_hat': np.array(run.fit.beta)})


class LassoMethod(EstimationMethod):
    ID = consts.Methods.LASSO

    def fit(self, dataset, context):
        fit, _ = context.lasso_run(dataset)
        return MethodResult(self.label, fit.beta, None, alpha=context.alpha, details={'lambda': fit.lam})


class MpleMethod(EstimationMethod):
    ID = consts.Methods.MPLE

    def fit(self, dataset, context):
        fit = lasso.fit_mple(dataset)
        if not fit.converged:
            raise exceptions.MaxIterExceededError('MPLE did not converge', fit=fit)
        return MethodResult(self.label, fit.beta, fit.covariance, alpha=context.alpha)


class OracleMethod(EstimationMethod):
    ID = consts.Methods.ORACLE

    def fit(self, dataset, context):
        from hdsurv.libs.coxinfer.core import simulation

        support = self._options.get('support', context.support)
        fit = simulation.fit_oracle(dataset, support)
        if not fit.converged:
            raise exceptions.MaxIterExceededError('Oracle fit did not converge', fit=fit)
        return MethodResult(self.label, fit.beta, fit.covariance, alpha=context.alpha)


BUILTIN_METHODS = (QpDebiasMethod, LassoMethod, MpleMethod, OracleMethod)


def create_factory(paths=None):
    """
    Returns a factory holding the built-in methods plus every method found under the given folders
    :param paths: list(str) or None
    :return: MethodFactory
    """

    factory = MethodFactory(EstimationMethod)
    for method_class in BUILTIN_METHODS:
        factory.register_method_from_class(method_class)
    if paths:
        found = factory.register_paths(paths, package_name='user')
        logger.info('Registered {} user method(s) from {}'.format(found, paths))

    return factory
