#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the synthetic survival data generator and the replication harness comparing estimation
methods by bias, coverage, model-based standard error and mean squared error
"""

from __future__ import print_function, division, absolute_import

import time
import logging
from collections import Counter

import numpy as np
import pandas as pd
from scipy import integrate, linalg
from joblib import Parallel, delayed

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import inference, lasso, theta as theta_utils
from hdsurv.libs.coxinfer.core.data import SurvivalDataset
from hdsurv.libs.coxinfer.core.kernel import CoxKernel
from hdsurv.libs.coxinfer.core.lasso import CoxFit

logger = logging.getLogger(consts.LIB_ID)


class SimConfig(object):
    """
    Simulation scenario. Built from nested tables (see SECTIONS); instances are frozen, use replace() to derive
    new ones
    """

    DEFAULTS = {
        'name': 'simulation',
        'n': 500,
        'p': 100,
        'replications': consts.REPLICATIONS,
        'seed': consts.DEFAULT_SEED,
        'methods': consts.Methods.ALL,
        'alpha': consts.CI_ALPHA,
        'targets': (0,),
        'joint_tests': (),
        'beta1': 1.0,
        'signal_values': consts.SIGNAL_VALUES,
        'layout': consts.BetaLayouts.SPREAD,
        'leading': None,
        'cov_structure': consts.CovStructures.INDEPENDENT,
        'rho': 0.5,
        'truncation': consts.TRUNCATION,
        'censoring': consts.CensoringKinds.UNIFORM,
        'censoring_rate': 0.2,
        'censoring_low': 1.0,
        'censoring_high': 20.0,
        'lam': None,
        'gamma': None,
        'lambda_folds': consts.LAMBDA_FOLDS,
        'gamma_folds': consts.GAMMA_FOLDS,
        'gamma_multipliers': consts.GAMMA_MULTIPLIERS,
        'threshold_alpha': consts.THRESHOLD_ALPHA,
        'denominator': consts.ThresholdDenominators.SQRT_DIAG,
        'cv_loss': consts.CvLosses.HELDOUT,
        'beta1_grid': (),
        'gamma_sweep': (),
        'gamma_sweep_relative': False,
    }

    # table name -> {key in the table: field}
    SECTIONS = {
        'beta': {'beta1': 'beta1', 'values': 'signal_values', 'layout': 'layout', 'leading': 'leading'},
        'covariates': {'structure': 'cov_structure', 'rho': 'rho', 'truncation': 'truncation'},
        'censoring': {
            'kind': 'censoring', 'rate': 'censoring_rate', 'low': 'censoring_low', 'high': 'censoring_high'},
        'tuning': {
            'lambda': 'lam', 'gamma': 'gamma', 'lambda_folds': 'lambda_folds', 'gamma_folds': 'gamma_folds',
            'gamma_multipliers': 'gamma_multipliers', 'threshold_alpha': 'threshold_alpha',
            'denominator': 'denominator', 'cv_loss': 'cv_loss'},
        'sweep': {'beta1': 'beta1_grid', 'gamma': 'gamma_sweep', 'relative': 'gamma_sweep_relative'},
    }

    def __init__(self, **fields):
        unknown = set(fields) - set(self.DEFAULTS)
        if unknown:
            raise exceptions.ConfigError('Unknown configuration keys: {}'.format(sorted(unknown)))
        values = dict(self.DEFAULTS)
        values.update(fields)
        for key in (
                'methods', 'targets', 'joint_tests', 'signal_values', 'gamma_multipliers', 'beta1_grid',
                'gamma_sweep'):
            values[key] = tuple(values[key])
        for key in ('n', 'p', 'replications', 'seed', 'lambda_folds', 'gamma_folds'):
            if isinstance(values[key], float) and values[key].is_integer():
                values[key] = int(values[key])
        if values['leading'] is not None:
            values['leading'] = tuple(float(value) for value in values['leading'])
        object.__setattr__(self, '_values', values)
        self._validate()

    def __getattr__(self, name):
        values = self.__dict__.get('_values', dict())
        if name in values:
            return values[name]
        raise AttributeError(name)

    def __setattr__(self, name, value):
        raise AttributeError('SimConfig is immutable, use replace()')

    def __eq__(self, other):
        return isinstance(other, SimConfig) and self._values == other._values

    def __hash__(self):
        return hash(tuple(sorted((key, repr(value)) for key, value in self._values.items())))

    def __repr__(self):
        return '[{} - {}: n={}, p={}, R={}]'.format(
            self.__class__.__name__, self.name, self.n, self.p, self.replications)

    @classmethod
    def from_dict(cls, document):
        """
        Builds a configuration from nested tables, as read from a TOML file
        :param document: dict
        :return: SimConfig
        """

        fields = dict()
        for key, value in document.items():
            if key in cls.SECTIONS:
                if not isinstance(value, dict):
                    raise exceptions.ConfigError('"{}" must be a table'.format(key))
                mapping = cls.SECTIONS[key]
                for inner_key, inner_value in value.items():
                    if inner_key not in mapping:
                        raise exceptions.ConfigError('Unknown key "{}.{}"'.format(key, inner_key))
                    fields[mapping[inner_key]] = inner_value
            elif key in cls.DEFAULTS and not any(key in mapping.values() for mapping in cls.SECTIONS.values()):
                fields[key] = value
            else:
                raise exceptions.ConfigError('Unknown configuration key "{}"'.format(key))

        return cls(**fields)

    def as_dict(self):
        values = dict(self._values)
        document = dict()
        for section, mapping in self.SECTIONS.items():
            document[section] = {key: _plain(values.pop(field)) for key, field in mapping.items()}
        document.update({key: _plain(value) for key, value in values.items()})
        return document

    def replace(self, **changes):
        values = dict(self._values)
        values.update(changes)
        return SimConfig(**values)

    @property
    def beta0(self):
        """
        True coefficient vector: explicit leading values padded with zeros, or the signal layout around beta1
        """

        if self.leading is not None:
            beta = np.zeros(self.p)
            beta[:len(self.leading)] = self.leading
            return beta
        return default_beta0(self.p, self.beta1, self.signal_values, self.layout)

    @property
    def support(self):
        return np.flatnonzero(self.beta0)

    def covariance(self):
        if self.cov_structure == consts.CovStructures.AR1:
            return linalg.toeplitz(self.rho ** np.arange(self.p))
        return np.eye(self.p)

    def targets_for(self, labels=None):
        return resolve_targets(self.targets, self.p, labels=labels)

    def joint_tests_for(self, labels=None):
        return resolve_joint_tests(self.joint_tests, self.p, labels=labels)

    def _validate(self):
        def fail(message):
            raise exceptions.ConfigError('{}: {}'.format(self._values['name'], message))

        try:
            if int(self.n) != self.n or self.n < 2:
                fail('n must be an integer >= 2')
            if int(self.p) != self.p or self.p < 1:
                fail('p must be an integer >= 1')
            if int(self.replications) != self.replications or self.replications < 1:
                fail('replications must be >= 1')
            if not 0 < self.alpha < 1:
                fail('alpha must be in (0, 1)')
            if self.cov_structure not in consts.CovStructures.ALL:
                fail('Unknown covariance structure "{}"'.format(self.cov_structure))
            if self.cov_structure == consts.CovStructures.AR1 and not -1 < self.rho < 1:
                fail('rho must be in (-1, 1)')
            if not self.truncation > 0:
                fail('truncation must be > 0')
            if self.censoring not in consts.CensoringKinds.ALL:
                fail('Unknown censoring kind "{}"'.format(self.censoring))
            if self.censoring == consts.CensoringKinds.EXPONENTIAL and not self.censoring_rate > 0:
                fail('censoring rate must be > 0')
            if self.censoring == consts.CensoringKinds.UNIFORM and not 0 <= self.censoring_low < self.censoring_high:
                fail('uniform censoring needs 0 <= low < high')
            if self.layout not in consts.BetaLayouts.ALL:
                fail('Unknown beta layout "{}"'.format(self.layout))
            if self.leading is not None and len(self.leading) > self.p:
                fail('more leading coefficients than covariates')
            if self.denominator not in consts.ThresholdDenominators.ALL:
                fail('Unknown threshold denominator "{}"'.format(self.denominator))
            if self.cv_loss not in consts.CvLosses.ALL:
                fail('Unknown CV loss "{}"'.format(self.cv_loss))
            if self.lambda_folds < 2 or self.gamma_folds < 2:
                fail('at least two folds are needed')
            if self.lam is not None and self.lam < 0:
                fail('lambda must be >= 0')
            if self.gamma is not None and self.gamma < 0:
                fail('gamma must be >= 0')
            if any(gamma < 0 for gamma in self.gamma_sweep):
                fail('swept gamma values must be >= 0')
            if not self.methods:
                fail('at least one method is needed')
            if not np.all(np.isfinite(self.beta0)):
                fail('beta0 must be finite')
            self.targets_for()
            self.joint_tests_for()
        except (TypeError, ValueError) as exc:
            fail(str(exc))


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


class Target(object):
    def __init__(self, name, loading):
        self.name = name
        self.loading = np.asarray(loading, dtype=float)

    def __repr__(self):
        return '[{} - {}]'.format(self.__class__.__name__, self.name)


def resolve_targets(targets, p, labels=None):
    """
    Turns target entries into loading vectors: an int is a 0-based coordinate, a table needs a name plus either
    an index or a full loading
    :return: list(Target)
    """

    labels = list(labels) if labels is not None else ['x{}'.format(i + 1) for i in range(p)]
    resolved = list()
    for entry in targets:
        if isinstance(entry, dict):
            if 'loading' in entry:
                loading = np.asarray(entry['loading'], dtype=float)
                if loading.shape != (p,):
                    raise exceptions.ConfigError('Target loading must have length {}'.format(p))
                resolved.append(Target(str(entry.get('name', 'c{}'.format(len(resolved)))), loading))
                continue
            entry_name, entry = entry.get('name'), entry.get('index')
        else:
            entry_name = None
        if isinstance(entry, bool) or not isinstance(entry, (int, np.integer)) or not 0 <= entry < p:
            raise exceptions.ConfigError('Target index {} out of range for p={}'.format(entry, p))
        loading = np.zeros(p)
        loading[entry] = 1.0
        resolved.append(Target(entry_name or labels[entry], loading))

    return resolved


class JointTarget(object):
    def __init__(self, name, matrix):
        self.name = name
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))

    def __repr__(self):
        return '[{} - {}: df={}]'.format(self.__class__.__name__, self.name, self.df)

    @property
    def df(self):
        return self.matrix.shape[0]


def resolve_joint_tests(entries, p, labels=None):
    """
    Turns joint test entries into loading matrices: a list of 0-based coordinates tests them together, a table
    needs either indices or rows (each a full loading) and may carry a name
    :return: list(JointTarget)
    """

    labels = list(labels) if labels is not None else ['x{}'.format(i + 1) for i in range(p)]
    resolved = list()
    for entry in entries:
        name = None
        if isinstance(entry, dict):
            name = entry.get('name')
            if 'rows' in entry:
                matrix = np.atleast_2d(np.asarray(entry['rows'], dtype=float))
                if matrix.shape[1] != p:
                    raise exceptions.ConfigError('Joint test rows must have length {}'.format(p))
                resolved.append(JointTarget(str(name or 'A{}'.format(len(resolved))), matrix))
                continue
            entry = entry.get('indices')
        indices = list(entry) if isinstance(entry, (list, tuple)) else None
        if not indices or any(
                isinstance(index, bool) or not isinstance(index, (int, np.integer)) or not 0 <= index < p
                for index in indices):
            raise exceptions.ConfigError('Joint test indices {} invalid for p={}'.format(entry, p))
        if len(set(indices)) != len(indices):
            raise exceptions.ConfigError('Joint test indices {} repeat a coordinate'.format(entry))
        matrix = np.zeros((len(indices), p))
        matrix[np.arange(len(indices)), indices] = 1.0
        resolved.append(JointTarget(str(name or ','.join(labels[index] for index in indices)), matrix))

    return resolved


def default_beta0(p, beta1, values=consts.SIGNAL_VALUES, layout=consts.BetaLayouts.SPREAD):
    """
    beta1 in the first coordinate and the signal values either at the evenly spaced indices p/5, 2p/5, ... (spread)
    or right after the first coordinate (leading); every other coordinate is zero
    :return: np.ndarray
    """

    values = list(values)
    beta = np.zeros(p)
    beta[0] = beta1
    if layout == consts.BetaLayouts.SPREAD:
        indices = [(k * p) // (len(values) + 1) for k in range(1, len(values) + 1)]
    else:
        indices = list(range(1, len(values) + 1))
    if len(set(indices)) != len(indices) or 0 in indices or (indices and max(indices) >= p):
        raise exceptions.ConfigError('p={} is too small for {} signal values with layout "{}"'.format(
            p, len(values), layout))
    beta[indices] = values

    return beta


def make_generator(seed):
    """
    Counter-based Philox generator. seed may be an int or a SeedSequence
    """

    return np.random.Generator(np.random.Philox(seed))


def draw_covariates(config, rng, truncate=True):
    normals = rng.standard_normal((config.n, config.p))
    if config.cov_structure == consts.CovStructures.AR1:
        normals = normals @ linalg.cholesky(config.covariance(), lower=True).T
    if truncate:
        normals = np.clip(normals, -config.truncation, config.truncation)
    return normals


def generate_dataset(config, rng=None):
    """
    X ~ N(0, Sigma) clipped entrywise at +-truncation, T ~ Exponential(exp(X.T beta0)) by inverse CDF,
    C exponential with rate kappa exp(X.T beta0) or Uniform(a, b); Y = min(T, C), delta = 1(T <= C)
    :param config: SimConfig
    :param rng: np.random.Generator or None (seeded from config.seed)
    :return: SurvivalDataset
    """

    rng = rng if rng is not None else make_generator(config.seed)
    covariates = draw_covariates(config, rng)
    rate = np.exp(covariates @ config.beta0)
    event_times = -np.log1p(-rng.random(config.n)) / rate
    if config.censoring == consts.CensoringKinds.EXPONENTIAL:
        censor_times = -np.log1p(-rng.random(config.n)) / (config.censoring_rate * rate)
    else:
        censor_times = rng.uniform(config.censoring_low, config.censoring_high, config.n)

    status = (event_times <= censor_times).astype(float)

    return SurvivalDataset(np.minimum(event_times, censor_times), status, covariates)


def expected_censoring_fraction(config):
    """
    P(C < T) in closed form for exponential censoring (kappa / (1 + kappa)) and by quadrature for uniform
    censoring when beta0 = 0. Returns None otherwise
    """

    if config.censoring == consts.CensoringKinds.EXPONENTIAL:
        return config.censoring_rate / (1.0 + config.censoring_rate)
    if np.any(config.beta0):
        return None
    low, high = config.censoring_low, config.censoring_high
    value, _ = integrate.quad(lambda c: np.exp(-c) / (high - low), low, high)
    return float(value)


# ================================================================================================================
# ORACLE / DECOMPOSITION
# ================================================================================================================

def fit_oracle(dataset, support, tol=consts.MPLE_TOL, max_iter=consts.MPLE_MAX_ITER):
    """
    MPLE restricted to the true support, embedded back into a p-vector (zeros elsewhere)
    :param dataset: SurvivalDataset
    :param support: iterable(int)
    :return: CoxFit
    """

    support = np.asarray(sorted(set(int(index) for index in (support if support is not None else ()))), dtype=int)
    if not support.size:
        raise exceptions.EmptySupportError('Oracle fit needs a nonempty support')
    if support[0] < 0 or support[-1] >= dataset.p:
        raise exceptions.DimensionMismatchError('Support {} out of range for p={}'.format(support, dataset.p))

    restricted = lasso.fit_mple(dataset.select_columns(support), tol=tol, max_iter=max_iter)
    beta = np.zeros(dataset.p)
    beta[support] = restricted.beta
    covariance = None
    if restricted.covariance is not None:
        covariance = np.zeros((dataset.p, dataset.p))
        covariance[np.ix_(support, support)] = restricted.covariance

    return CoxFit(
        beta, 0.0, restricted.objective, restricted.iterations, restricted.converged, restricted.tol,
        history=restricted.history, covariance=covariance, kkt=restricted.kkt, method=consts.Methods.ORACLE)


class DecompositionDiag(object):
    def __init__(self, total, leading, remainder):
        self.total = float(total)
        self.leading = float(leading)
        self.remainder = float(remainder)

    def __repr__(self):
        return '[{} - total: {:.4g}, leading: {:.4g}, remainder: {:.4g}]'.format(
            self.__class__.__name__, self.total, self.leading, self.remainder)

    def as_dict(self):
        return {'total': self.total, 'leading': self.leading, 'remainder': self.remainder}


def decompose_error(dataset, beta0, beta_hat, theta, c, kernel=None):
    """
    Splits c.T (b - beta0) into the leading term -c.T Theta score(beta0) and the remainder
    :return: DecompositionDiag
    """

    kernel = kernel or CoxKernel(dataset)
    beta0 = np.asarray(beta0, dtype=float)
    c = np.asarray(c, dtype=float)
    if beta0.shape != (dataset.p,) or c.shape != (dataset.p,):
        raise exceptions.DimensionMismatchError('beta0 {} and c {} must have length {}'.format(
            beta0.shape, c.shape, dataset.p))

    matrix = np.asarray(getattr(theta, 'matrix', theta), dtype=float)
    b = inference.debias(beta_hat, matrix, kernel.score(beta_hat))
    total = float(c @ (b - beta0))
    leading = float(-c @ (matrix @ kernel.score(beta0)))

    return DecompositionDiag(total, leading, total - leading)


# ================================================================================================================
# REPLICATIONS
# ================================================================================================================

def coverage_metrics(estimates, truth, std_errors, lowers, uppers):
    """
    Bias, MSE, coverage and mean SE over replications. Coverage and SE ignore replications without an interval
    :return: dict
    """

    estimates = np.asarray(estimates, dtype=float)
    if not estimates.size:
        return {'bias': np.nan, 'mse': np.nan, 'coverage': np.nan, 'se': np.nan, 'successes': 0}
    errors = estimates - truth
    lowers = np.asarray(lowers, dtype=float)
    uppers = np.asarray(uppers, dtype=float)
    std_errors = np.asarray(std_errors, dtype=float)
    with_interval = np.isfinite(lowers) & np.isfinite(uppers)
    covered = (lowers[with_interval] <= truth) & (truth <= uppers[with_interval])
    finite_se = std_errors[np.isfinite(std_errors)]

    return {
        'bias': float(errors.mean()),
        'mse': float(np.mean(errors ** 2)),
        'coverage': float(covered.mean()) if covered.size else np.nan,
        'se': float(finite_se.mean()) if finite_se.size else np.nan,
        'successes': int(estimates.size),
    }


class SimSummary(object):
    COLUMNS = ('method', 'target', 'truth', 'bias', 'coverage', 'rejection', 'se', 'mse', 'R', 'failures')
    TEST_COLUMNS = ('method', 'test', 'df', 'rejection', 'mean_statistic', 'tested', 'R', 'failures')

    def __init__(self, config, rows, failures, replications, scenario=None, elapsed=None, tests=None):
        self.config = config
        self.rows = list(rows)
        self.tests = list(tests or list())
        self.failures = dict(failures)
        self.replications = int(replications)
        self.scenario = dict(scenario or dict())
        self.elapsed = elapsed

    def __repr__(self):
        return '[{} - {}: R={}, rows={}]'.format(
            self.__class__.__name__, self.config.name, self.replications, len(self.rows))

    def row(self, method, target):
        for row in self.rows:
            if row['method'] == method and row['target'] == target:
                return row
        return None

    def test(self, method, name):
        for row in self.tests:
            if row['method'] == method and row['test'] == name:
                return row
        return None

    def as_dict(self):
        return {
            'name': self.config.name,
            'scenario': self.scenario,
            'R': self.replications,
            'rows': self.rows,
            'tests': self.tests,
            'failures': {method: dict(reasons) for method, reasons in self.failures.items()},
        }

    def _frame(self, rows, columns):
        frame = pd.DataFrame(rows, columns=list(columns))
        for position, (key, value) in enumerate(sorted(self.scenario.items())):
            frame.insert(position, key, value)
        return frame

    def to_frame(self):
        return self._frame(self.rows, self.COLUMNS)

    def tests_frame(self):
        return self._frame(self.tests, self.TEST_COLUMNS)


def _rate(values):
    values = np.asarray([value for value in values if value is not None and np.isfinite(value)], dtype=float)
    return float(values.mean()) if values.size else np.nan


def summarize(config, records, targets, replications, scenario=None, elapsed=None, joint_tests=None):
    """
    Ordered reduction of per replication records into a SimSummary. Rejection rates come from tests of the true
    value, so they estimate the size of the Wald and chi-square tests
    :param records: list(list(dict)), one list per replication
    :param joint_tests: list(JointTarget) or None
    :return: SimSummary
    """

    truths = {target.name: float(target.loading @ config.beta0) for target in targets}
    methods = list()
    values = dict()
    statistics = dict()
    failures = dict()
    for replication in records:
        for record in replication:
            method = record['method']
            if method not in methods:
                methods.append(method)
            if 'error' in record:
                failures.setdefault(method, Counter())[record['error']] += 1
                continue
            if 'test' in record:
                statistics.setdefault((method, record['test']), list()).append(record)
                continue
            values.setdefault((method, record['target']), list()).append(record)

    rows = list()
    for method in methods:
        failed = sum(failures.get(method, Counter()).values())
        for target in targets:
            entries = values.get((method, target.name), list())
            metrics = coverage_metrics(
                [entry['estimate'] for entry in entries], truths[target.name], [entry['se'] for entry in entries],
                [entry['lower'] for entry in entries], [entry['upper'] for entry in entries])
            rows.append({
                'method': method, 'target': target.name, 'truth': truths[target.name], 'bias': metrics['bias'],
                'coverage': metrics['coverage'], 'rejection': _rate(entry.get('reject') for entry in entries),
                'se': metrics['se'], 'mse': metrics['mse'], 'R': replications, 'failures': failed})

    tests = list()
    for method in methods:
        failed = sum(failures.get(method, Counter()).values())
        for joint in joint_tests or list():
            entries = statistics.get((method, joint.name), list())
            tests.append({
                'method': method, 'test': joint.name, 'df': joint.df,
                'rejection': _rate(entry['reject'] for entry in entries),
                'mean_statistic': _rate(entry['statistic'] for entry in entries),
                'tested': sum(1 for entry in entries if entry['reject'] is not None), 'R': replications,
                'failures': failed})

    return SimSummary(config, rows, failures, replications, scenario=scenario, elapsed=elapsed, tests=tests)


def replication_seeds(seed, replications):
    return np.random.SeedSequence(seed).spawn(replications)


def _method_context(config, seed_sequence):
    from hdsurv.libs.coxinfer.core import methods as methods_utils

    gamma_grid = None
    if config.gamma is None:
        gamma_grid = theta_utils.default_gamma_grid(config.n, config.p, multipliers=config.gamma_multipliers)

    return methods_utils.MethodContext(
        alpha=config.alpha, lam=config.lam, lambda_folds=config.lambda_folds, gamma=config.gamma,
        gamma_folds=config.gamma_folds, gamma_grid=gamma_grid, threshold_alpha=config.threshold_alpha,
        denominator=config.denominator, cv_loss=config.cv_loss, seed=int(seed_sequence.generate_state(1)[0]),
        support=config.support, n_jobs=1)


def _replicate(config, methods, targets, seed_sequence, joint_tests=()):
    dataset = generate_dataset(config, rng=make_generator(seed_sequence))
    context = _method_context(config, seed_sequence)
    records = list()
    for method in methods:
        try:
            result = method.fit(dataset, context)
        except exceptions.CoxInferError as exc:
            records.append({'method': method.label, 'error': exc.__class__.__name__})
            continue
        for target in targets:
            estimate, se, lower, upper = result.linear(target.loading)
            wald = result.wald(target.loading, a0=float(target.loading @ config.beta0))
            records.append({
                'method': method.label, 'target': target.name, 'estimate': estimate, 'se': se, 'lower': lower,
                'upper': upper, 'reject': None if wald is None else float(wald.reject)})
        for joint in joint_tests:
            test = result.joint(joint.matrix, a0=joint.matrix @ config.beta0)
            records.append({
                'method': method.label, 'test': joint.name, 'statistic': None if test is None else test.statistic,
                'reject': None if test is None else float(test.reject)})
    return records


def resolve_methods(config, methods=None, factory=None):
    """
    Instantiates the requested methods. Identifiers are looked up in the factory; qp_debias expands into one
    method per swept gamma when the configuration has a gamma sweep
    :return: list(EstimationMethod)
    """

    from hdsurv.libs.coxinfer.core import methods as methods_utils

    factory = factory or methods_utils.create_factory()
    resolved = list()
    for method in (methods if methods is not None else config.methods):
        if isinstance(method, methods_utils.EstimationMethod):
            resolved.append(method)
            continue
        method_class = factory.get_method_from_id(method)
        if method_class is None:
            raise exceptions.ConfigError('Unknown method "{}" (available: {})'.format(
                method, factory.identifiers()))
        if method == consts.Methods.QP_DEBIAS and config.gamma_sweep:
            base = np.sqrt(np.log(max(config.p, 2)) / config.n) if config.gamma_sweep_relative else 1.0
            resolved.extend(method_class(gamma=float(gamma * base)) for gamma in config.gamma_sweep)
            continue
        resolved.append(method_class())

    return resolved


def _prefer(methods):
    # methods loaded from source live in modules worker processes cannot import
    if any(type(method).__module__.startswith('hdsurv_method_') for method in methods):
        return 'threads'
    return 'processes'


def run_replications(
        config, methods=None, replications=None, targets=None, alpha=None, n_jobs=1, factory=None, scenario=None):
    """
    Generates R datasets from independent streams, fits every method on each and aggregates the results.
    A method failing on a replication is tallied, not fatal
    :param config: SimConfig
    :param methods: list(str or EstimationMethod) or None (config.methods)
    :param replications: int or None (config.replications)
    :param targets: list(Target) or None (config targets)
    :param alpha: float or None (config.alpha)
    :param n_jobs: int, replications run concurrently
    :return: SimSummary
    """

    if replications is not None:
        config = config.replace(replications=replications)
    if alpha is not None:
        config = config.replace(alpha=alpha)
    methods = resolve_methods(config, methods=methods, factory=factory)
    targets = targets if targets is not None else config.targets_for()
    joint_tests = config.joint_tests_for()

    start = time.perf_counter()
    records = Parallel(n_jobs=n_jobs, prefer=_prefer(methods))(
        delayed(_replicate)(config, methods, targets, seed_sequence, joint_tests=joint_tests)
        for seed_sequence in replication_seeds(config.seed, config.replications))
    elapsed = time.perf_counter() - start

    summary = summarize(
        config, records, targets, config.replications, scenario=scenario, elapsed=elapsed, joint_tests=joint_tests)
    for method, reasons in summary.failures.items():
        logger.warning('{} failed on {} replication(s): {}'.format(method, sum(reasons.values()), dict(reasons)))
    logger.info('{} finished in {:.1f}s'.format(summary, elapsed))

    return summary


def run_sweep(config, methods=None, n_jobs=1, factory=None):
    """
    One run_replications per beta1 value in config.beta1_grid (a single run when the grid is empty)
    :return: list(SimSummary)
    """

    if not config.beta1_grid:
        return [run_replications(config, methods=methods, n_jobs=n_jobs, factory=factory)]

    summaries = list()
    for beta1 in config.beta1_grid:
        scenario_config = config.replace(beta1=float(beta1))
        summaries.append(run_replications(
            scenario_config, methods=methods, n_jobs=n_jobs, factory=factory, scenario={'beta1': float(beta1)}))

    return summaries


def summaries_frame(summaries):
    return pd.concat([summary.to_frame() for summary in summaries], ignore_index=True)


def tests_frame(summaries):
    """
    Joint test rows of every summary, or None when no scenario declares joint tests
    :return: pd.DataFrame or None
    """

    frames = [summary.tests_frame() for summary in summaries if summary.tests]
    return pd.concat(frames, ignore_index=True) if frames else None


class DecompositionSummary(object):
    def __init__(self, config, target, diagnostics, failures):
        self.config = config
        self.target = target
        self.diagnostics = list(diagnostics)
        self.failures = int(failures)

    def __repr__(self):
        return '[{} - {}: n={}, mean |remainder|={:.4g}]'.format(
            self.__class__.__name__, self.target.name, self.config.n, self.mean_abs_remainder)

    def _mean_abs(self, attribute):
        values = [abs(getattr(diag, attribute)) for diag in self.diagnostics]
        return float(np.mean(values)) if values else np.nan

    @property
    def mean_abs_remainder(self):
        return self._mean_abs('remainder')

    @property
    def mean_abs_leading(self):
        return self._mean_abs('leading')

    @property
    def mean_abs_total(self):
        return self._mean_abs('total')

    def as_dict(self):
        return {
            'name': self.config.name, 'n': self.config.n, 'p': self.config.p, 'target': self.target.name,
            'R': len(self.diagnostics) + self.failures, 'failures': self.failures,
            'mean_abs_total': self.mean_abs_total, 'mean_abs_leading': self.mean_abs_leading,
            'mean_abs_remainder': self.mean_abs_remainder,
            'replications': [diag.as_dict() for diag in self.diagnostics]}

    def to_frame(self):
        frame = pd.DataFrame([diag.as_dict() for diag in self.diagnostics], columns=['total', 'leading', 'remainder'])
        frame.insert(0, 'replication', np.arange(len(frame)))
        return frame


def _decompose_replication(config, target, seed_sequence):
    from hdsurv.libs.coxinfer.core import methods as methods_utils

    dataset = generate_dataset(config, rng=make_generator(seed_sequence))
    try:
        run = methods_utils.run_debiased(dataset, _method_context(config, seed_sequence))
    except exceptions.CoxInferError as exc:
        logger.debug('Decomposition replication failed: {}'.format(exc))
        return None

    return decompose_error(dataset, config.beta0, run.fit.beta, run.theta, target.loading)


def run_decomposition(config, target=None, replications=None, n_jobs=1):
    """
    Error decomposition of the debiased estimate over replications of the scenario
    :return: DecompositionSummary
    """

    if replications is not None:
        config = config.replace(replications=replications)
    target = target or config.targets_for()[0]

    results = Parallel(n_jobs=n_jobs)(
        delayed(_decompose_replication)(config, target, seed_sequence)
        for seed_sequence in replication_seeds(config.seed, config.replications))
    diagnostics = [result for result in results if result is not None]

    summary = DecompositionSummary(config, target, diagnostics, len(results) - len(diagnostics))
    logger.info('Decomposition: {}'.format(summary))

    return summary


# ================================================================================================================
# BENCHMARK
# ================================================================================================================

BENCH_COLUMNS = [
    'p', 'multiplier', 'gamma', 'mean_seconds', 'seconds_per_row', 'mean_active_size', 'max_active_size', 'repeats']


def bench_theta(p_grid, gamma_multipliers, n=500, repeats=consts.BENCH_REPEATS, seed=consts.DEFAULT_SEED, rho=0.5):
    """
    Mean wall time of estimate_theta over repeated datasets for every (p, gamma) pair. gamma values are multiples
    of sqrt(log p / n); Sigma-hat is evaluated at the true coefficients of an AR(1) design with beta1 = 1
    :return: pd.DataFrame with columns p, multiplier, gamma, mean_seconds, seconds_per_row, mean_active_size,
        max_active_size, repeats
    """

    rows = list()
    for p in p_grid:
        config = SimConfig(
            name='bench', n=n, p=int(p), seed=seed, cov_structure=consts.CovStructures.AR1, rho=rho,
            layout=consts.BetaLayouts.SPREAD if p >= len(consts.SIGNAL_VALUES) + 1 else consts.BetaLayouts.LEADING,
            signal_values=consts.SIGNAL_VALUES[:max(0, min(len(consts.SIGNAL_VALUES), int(p) - 1))])
        sigmas = [
            CoxKernel(generate_dataset(config, rng=make_generator(seed_sequence))).sigma_hat(config.beta0)
            for seed_sequence in replication_seeds(seed, repeats)]
        base = np.sqrt(np.log(max(p, 2)) / n)
        for multiplier in gamma_multipliers:
            gamma = float(multiplier * base)
            seconds = list()
            active_sizes = list()
            for sigma in sigmas:
                start = time.perf_counter()
                theta = theta_utils.estimate_theta(sigma, gamma)
                seconds.append(time.perf_counter() - start)
                active_sizes.append(theta.active_sizes)
            active_sizes = np.concatenate(active_sizes)
            rows.append({
                'p': int(p), 'multiplier': float(multiplier), 'gamma': gamma, 'mean_seconds': float(np.mean(seconds)),
                'seconds_per_row': float(np.mean(seconds)) / int(p), 'mean_active_size': float(active_sizes.mean()),
                'max_active_size': int(active_sizes.max()), 'repeats': int(repeats)})
            logger.info('bench p={} gamma={:.4g}: {:.4f}s'.format(p, gamma, rows[-1]['mean_seconds']))

    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
