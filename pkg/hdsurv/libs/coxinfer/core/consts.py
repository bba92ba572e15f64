#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that constant definitions used by hdsurv-libs-coxinfer
"""

from __future__ import print_function, division, absolute_import

LIB_ID = 'hdsurv-libs-coxinfer'
FALLBACK_VERSION = '0.1.0'

# Output schema of every JSON document written by the CLI
SCHEMA_VERSION = 1

# Significant digits used when writing floats to CSV/JSON
FLOAT_FORMAT = '%.17g'

# Historical scenario file names still accepted by the simulate command
PRESET_ALIASES = {'fig1': 'gamma_sweep', 'fig2_p100': 'methods_p100', 'fig2_p50': 'methods_p50'}

TIES = 'breslow'


class StandardizeModes(object):
    NONE = 'none'
    CENTER = 'center'
    ZSCORE = 'zscore'

    ALL = (NONE, CENTER, ZSCORE)


class ValidationCodes(object):
    NEGATIVE_TIME = 'NegativeTime'
    NON_FINITE_TIME = 'NonFiniteTime'
    INVALID_STATUS = 'InvalidStatus'
    NON_FINITE_COVARIATE = 'NonFiniteCovariate'
    TOO_FEW_SUBJECTS = 'TooFewSubjects'
    NO_EVENTS = 'NoEvents'
    SHAPE_MISMATCH = 'ShapeMismatch'


class CvLosses(object):
    # held-out negative log partial likelihood on the test fold alone
    HELDOUT = 'heldout'
    # Verweij and van Houwelingen cross-validated partial likelihood
    VVH = 'vvh'

    ALL = (HELDOUT, VVH)


class ThresholdDenominators(object):
    SQRT_DIAG = 'sqrt-diag'
    DIAG = 'diag'

    ALL = (SQRT_DIAG, DIAG)


# ================================================================================================================
# COX KERNEL
# ================================================================================================================

# Width (in linear predictor units) of a window sharing one exponential shift inside risk-set sums
SHIFT_WINDOW = 50.0

# ================================================================================================================
# LASSO / MPLE
# ================================================================================================================

LASSO_TOL = 1e-7
LASSO_MAX_ITER = 200
LASSO_MAX_INNER_SWEEPS = 1000
LAMBDA_GRID_COUNT = 50
LAMBDA_GRID_RATIO = 0.01
LAMBDA_FOLDS = 10
MAX_STEP_HALVINGS = 30

MPLE_TOL = 1e-9
MPLE_MAX_ITER = 100
MPLE_CONDITION_LIMIT = 1e12
# |beta| beyond this bound signals a monotone likelihood (separation)
MPLE_DIVERGENCE_BOUND = 10.0
# smallest Hessian eigenvalue below this at a stationary point also signals separation
MPLE_FLAT_EIGENVALUE = 1e-8

# ================================================================================================================
# QUADRATIC PROGRAMMING / THETA
# ================================================================================================================

QP_TOL = 1e-10
QP_MAX_CHANGES_PER_DIM = 50
RIDGE_EIGENVALUE_FLOOR = 1e-10
RIDGE_SCALE = 1e-8
THETA_ROW_FEASIBILITY_TOL = 1e-8
THETA_ASYMMETRY_WARNING = 1e-3

GAMMA_MULTIPLIERS = (0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0)
GAMMA_FOLDS = 5
THRESHOLD_ALPHA = 0.1

# ================================================================================================================
# INFERENCE
# ================================================================================================================

CI_ALPHA = 0.05
NON_PD_RELATIVE_EIGENVALUE = 1e-12

# ================================================================================================================
# SIMULATION
# ================================================================================================================

TRUNCATION = 2.5
SIGNAL_VALUES = (1.0, 1.0, 0.5, 0.5)
REPLICATIONS = 200
DEFAULT_SEED = 20210101
BENCH_REPEATS = 10


class CensoringKinds(object):
    EXPONENTIAL = 'exponential'
    UNIFORM = 'uniform'

    ALL = (EXPONENTIAL, UNIFORM)


class CovStructures(object):
    INDEPENDENT = 'independent'
    AR1 = 'ar1'

    ALL = (INDEPENDENT, AR1)


class BetaLayouts(object):
    # beta1 first, remaining signal values at p/5, 2p/5, 3p/5, 4p/5
    SPREAD = 'spread'
    # beta1 first, remaining signal values right after it
    LEADING = 'leading'

    ALL = (SPREAD, LEADING)


class Methods(object):
    QP_DEBIAS = 'qp_debias'
    LASSO = 'lasso'
    MPLE = 'mple'
    ORACLE = 'oracle'

    ALL = (QP_DEBIAS, LASSO, MPLE, ORACLE)


class ExitCodes(object):
    OK = 0
    PARSE = 2
    DATA = 3
    SOLVER = 4
    QP = 5
