#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains exceptions raised by hdsurv-libs-coxinfer
"""

from __future__ import print_function, division, absolute_import

from hdsurv.libs.coxinfer.core import consts


class CoxInferError(Exception):
    """
    Base exception of the library. exit_code is the CLI exit status for this failure class
    """

    exit_code = 1


# ================================================================================================================
# DATA
# ================================================================================================================

class DataError(CoxInferError):
    exit_code = consts.ExitCodes.DATA


class MissingColumnError(DataError):
    def __init__(self, column, available=None):
        self.column = column
        self.available = list(available or list())
        super(MissingColumnError, self).__init__(
            'Column "{}" not found. Available columns: {}'.format(column, ', '.join(self.available)))


class NonNumericCellError(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super(NonNumericCellError, self).__init__(
            'Non numeric value {!r} at row {}, column "{}"'.format(value, row, column))


class EmptyFileError(DataError):
    pass


class InvalidDatasetError(DataError):
    def __init__(self, report):
        self.report = report
        super(InvalidDatasetError, self).__init__(
            'Dataset failed validation: {}'.format(', '.join(sorted({v.code for v in report.violations}))))


class ConstantColumnError(DataError):
    def __init__(self, column):
        self.column = column
        super(ConstantColumnError, self).__init__('Column {} is constant and cannot be z-scored'.format(column))


# ================================================================================================================
# KERNEL
# ================================================================================================================

class KernelError(CoxInferError):
    exit_code = consts.ExitCodes.SOLVER


class EmptyRiskSetError(KernelError):
    pass


class NonFiniteLinearPredictorError(KernelError):
    pass


# ================================================================================================================
# LASSO / MPLE
# ================================================================================================================

class SolverError(CoxInferError):
    exit_code = consts.ExitCodes.SOLVER


class MaxIterExceededError(SolverError):
    def __init__(self, message, fit=None):
        self.fit = fit
        super(MaxIterExceededError, self).__init__(message)


class NonFiniteObjectiveError(SolverError):
    pass


class SingularHessianError(SolverError):
    pass


class MonotoneLikelihoodError(SolverError):
    pass


class FoldWithoutEventsError(SolverError):
    def __init__(self, fold):
        self.fold = fold
        super(FoldWithoutEventsError, self).__init__('Training data of fold {} has no events'.format(fold))


class EmptySupportError(SolverError):
    pass


# ================================================================================================================
# QUADRATIC PROGRAMMING
# ================================================================================================================

class QpError(CoxInferError):
    exit_code = consts.ExitCodes.QP


class InfeasibleError(QpError):
    pass


class NotPositiveDefiniteError(QpError):
    pass


class MaxActiveSetChangesError(QpError):
    pass


class ThetaRowError(QpError):
    def __init__(self, row, error):
        self.row = row
        self.error = error
        super(ThetaRowError, self).__init__('Row {}: {}: {}'.format(row, type(error).__name__, error))


# ================================================================================================================
# INFERENCE
# ================================================================================================================

class InferenceError(CoxInferError):
    exit_code = consts.ExitCodes.SOLVER


class DimensionMismatchError(InferenceError):
    pass


class NonPositiveVarianceError(InferenceError):
    pass


class NonPositiveDiagonalError(InferenceError):
    pass


class RankDeficientError(InferenceError):
    pass


class NonPdFError(InferenceError):
    pass


# ================================================================================================================
# CONFIGURATION
# ================================================================================================================

class ConfigError(CoxInferError):
    exit_code = consts.ExitCodes.DATA
