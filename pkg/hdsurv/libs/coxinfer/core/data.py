#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains right-censored survival data containers: ingestion, validation, scaling and risk-set indexing
"""

from __future__ import print_function, division, absolute_import

import os
import json
import logging

import numpy as np
import pandas as pd

from hdsurv.libs.coxinfer.core import consts, exceptions

logger = logging.getLogger(consts.LIB_ID)


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class SurvivalDataset(object):
    """
    Observed triples (Y, delta, X) for n subjects and p covariates. Arrays are read-only after construction.
    Invariants are not enforced here so invalid data can be reported by validate(); load_csv rejects it.
    """

    def __init__(self, times, status, covariates, labels=None):
        times = np.asarray(times, dtype=float).reshape(-1)
        status = np.asarray(status, dtype=float).reshape(-1)
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        if covariates.ndim != 2 or covariates.shape[0] != times.shape[0] or status.shape[0] != times.shape[0]:
            raise exceptions.DataError(
                'Shape mismatch: times {}, status {}, covariates {}'.format(
                    times.shape, status.shape, covariates.shape))

        self._times = _frozen(times)
        self._status = _frozen(status)
        self._covariates = _frozen(covariates)
        labels = list(labels) if labels is not None else ['x{}'.format(i + 1) for i in range(covariates.shape[1])]
        if len(labels) != covariates.shape[1]:
            raise exceptions.DataError('Expected {} labels, got {}'.format(covariates.shape[1], len(labels)))
        self._labels = tuple(str(label) for label in labels)

    def __repr__(self):
        return '[{} - n: {}, p: {}, events: {}]'.format(self.__class__.__name__, self.n, self.p, self.event_count)

    def __len__(self):
        return self.n

    @property
    def n(self):
        return self._times.shape[0]

    @property
    def p(self):
        return self._covariates.shape[1]

    @property
    def times(self):
        return self._times

    @property
    def status(self):
        return self._status

    @property
    def covariates(self):
        return self._covariates

    @property
    def labels(self):
        return self._labels

    @property
    def event_count(self):
        return int(np.sum(self._status == 1))

    def subset(self, rows):
        """
        Returns a new dataset restricted to the given row indices (or boolean mask)
        :param rows: array of int or bool
        :return: SurvivalDataset
        """

        rows = np.asarray(rows)
        return SurvivalDataset(self._times[rows], self._status[rows], self._covariates[rows], labels=self._labels)

    def select_columns(self, columns):
        """
        Returns a new dataset keeping only the given covariate columns
        :param columns: list(int)
        :return: SurvivalDataset
        """

        columns = list(columns)
        return SurvivalDataset(
            self._times, self._status, self._covariates[:, columns], labels=[self._labels[i] for i in columns])

    def with_covariates(self, covariates, labels=None):
        return SurvivalDataset(
            self._times, self._status, covariates, labels=self._labels if labels is None else labels)


class Violation(object):
    def __init__(self, code, row=None, col=None):
        self.code = code
        self.row = row
        self.col = col

    def __repr__(self):
        return 'Violation({}, row={}, col={})'.format(self.code, self.row, self.col)

    def __eq__(self, other):
        return isinstance(other, Violation) and (self.code, self.row, self.col) == (other.code, other.row, other.col)

    def __hash__(self):
        return hash((self.code, self.row, self.col))

    def as_dict(self):
        return {'code': self.code, 'row': self.row, 'col': self.col}


class ValidationReport(object):
    def __init__(self, violations=None):
        self._violations = tuple(violations or list())

    def __repr__(self):
        return '[{} - Violations: {}]'.format(self.__class__.__name__, len(self._violations))

    def __len__(self):
        return len(self._violations)

    def __iter__(self):
        return iter(self._violations)

    @property
    def violations(self):
        return self._violations

    @property
    def is_valid(self):
        return not self._violations

    def codes(self):
        return {violation.code for violation in self._violations}

    def to_json_lines(self):
        """
        Serializes the report as JSON lines {"code":..., "row":..., "col":...}
        :return: str
        """

        return ''.join(json.dumps(violation.as_dict()) + '\n' for violation in self._violations)


class ScalingInfo(object):
    """
    Per column centers and positive scales. Estimates and standard errors on the original covariate scale are
    obtained by dividing by the column scale
    """

    def __init__(self, centers, scales):
        centers = np.asarray(centers, dtype=float).reshape(-1)
        scales = np.asarray(scales, dtype=float).reshape(-1)
        if centers.shape != scales.shape:
            raise exceptions.DataError('centers and scales must have the same length')
        if np.any(~(scales > 0)):
            raise exceptions.DataError('Scales must be strictly positive')
        self._centers = _frozen(centers)
        self._scales = _frozen(scales)

    def __repr__(self):
        return '[{} - p: {}, identity: {}]'.format(self.__class__.__name__, self._centers.shape[0], self.is_identity)

    @classmethod
    def identity(cls, p):
        return cls(np.zeros(p), np.ones(p))

    @property
    def centers(self):
        return self._centers

    @property
    def scales(self):
        return self._scales

    @property
    def is_identity(self):
        return bool(np.all(self._centers == 0) and np.all(self._scales == 1))

    def to_original(self, values):
        """
        Maps coefficients, standard errors or CI bounds from the transformed to the original covariate scale
        :param values: array whose last axis has length p
        :return: np.ndarray
        """

        return np.asarray(values, dtype=float) / self._scales

    def loading_to_transformed(self, loading):
        """
        Maps a loading vector c (or loading matrix rows) defined on the original scale to the transformed scale,
        so that c.T beta_original == c_transformed.T beta_transformed
        """

        return np.asarray(loading, dtype=float) / self._scales

    def as_dict(self):
        return {'centers': self._centers.tolist(), 'scales': self._scales.tolist()}


class RiskIndex(object):
    """
    Sorted view of a dataset. Position k refers to the k-th smallest time; the Breslow risk set at position k is
    every position >= group_start[k]
    """

    def __init__(self, order, sorted_times, sorted_status, group_start):
        self._order = _frozen(order, dtype=np.intp)
        self._sorted_times = _frozen(sorted_times)
        self._group_start = _frozen(group_start, dtype=np.intp)
        self._event_positions = _frozen(np.flatnonzero(np.asarray(sorted_status) == 1), dtype=np.intp)

        groups = dict()
        for position in self._event_positions:
            groups.setdefault(int(self._group_start[position]), list()).append(int(position))
        self._tie_groups = tuple(tuple(positions) for _, positions in sorted(groups.items()))

    def __repr__(self):
        return '[{} - n: {}, events: {}, tie groups: {}]'.format(
            self.__class__.__name__, self._order.shape[0], self._event_positions.shape[0], len(self._tie_groups))

    @property
    def order(self):
        return self._order

    @property
    def sorted_times(self):
        return self._sorted_times

    @property
    def event_positions(self):
        return self._event_positions

    @property
    def tie_groups(self):
        return self._tie_groups

    @property
    def group_start(self):
        return self._group_start

    def risk_set_size(self, position):
        return self._order.shape[0] - int(self._group_start[position])

    def event_time_risk_sizes(self):
        """
        Returns (distinct event times, risk set size at each of them)
        :return: tuple(np.ndarray, np.ndarray)
        """

        starts = np.array([group[0] for group in self._tie_groups], dtype=np.intp)
        if not starts.size:
            return np.zeros(0), np.zeros(0, dtype=np.intp)
        return self._sorted_times[starts], self._order.shape[0] - self._group_start[starts]


# ================================================================================================================
# OPERATIONS
# ================================================================================================================

def load_csv(path, time_col='time', status_col='status'):
    """
    Loads a survival dataset from a CSV file with a header row. Every column other than the time and status
    columns becomes a covariate, in header order
    :param path: str
    :param time_col: str
    :param status_col: str
    :return: SurvivalDataset
    """

    if not os.path.isfile(path):
        raise IOError('File not found: {}'.format(path))

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise exceptions.EmptyFileError('File is empty: {}'.format(path))
    if frame.empty:
        raise exceptions.EmptyFileError('File has no data rows: {}'.format(path))

    columns = [str(column).strip() for column in frame.columns]
    frame.columns = columns
    for column in (time_col, status_col):
        if column not in columns:
            raise exceptions.MissingColumnError(column, columns)

    numeric = dict()
    for column in columns:
        raw = frame[column].str.strip()
        values = pd.to_numeric(raw, errors='coerce')
        bad = np.flatnonzero(values.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raise exceptions.NonNumericCellError(row, column, frame[column].iloc[row])
        # pandas' fast parser may be 1 ulp off; numpy's string conversion is correctly rounded
        numeric[column] = raw.to_numpy().astype(float)

    labels = [column for column in columns if column not in (time_col, status_col)]
    covariates = np.column_stack([numeric[label] for label in labels]) if labels else np.zeros((len(frame), 0))
    dataset = SurvivalDataset(numeric[time_col], numeric[status_col], covariates, labels=labels)

    report = validate(dataset)
    if not report.is_valid:
        raise exceptions.InvalidDatasetError(report)

    logger.debug('Loaded {} from {}'.format(dataset, path))

    return dataset


def write_csv(dataset, path, time_col='time', status_col='status'):
    """
    Writes a dataset with 17 significant digits so load_csv recovers it bit-exactly
    :param dataset: SurvivalDataset
    :param path: str
    :param time_col: str
    :param status_col: str
    """

    frame = pd.DataFrame(dataset.covariates, columns=list(dataset.labels))
    frame.insert(0, status_col, dataset.status)
    frame.insert(0, time_col, dataset.times)
    frame.to_csv(path, index=False, float_format=consts.FLOAT_FORMAT)


def validate(dataset):
    """
    Lists every violation of the SurvivalDataset invariants. Never raises
    :param dataset: SurvivalDataset
    :return: ValidationReport
    """

    violations = list()
    codes = consts.ValidationCodes

    for row in np.flatnonzero(~np.isfinite(dataset.times)):
        violations.append(Violation(codes.NON_FINITE_TIME, row=int(row)))
    for row in np.flatnonzero(np.isfinite(dataset.times) & (dataset.times < 0)):
        violations.append(Violation(codes.NEGATIVE_TIME, row=int(row)))
    for row in np.flatnonzero(~np.isin(dataset.status, (0.0, 1.0))):
        violations.append(Violation(codes.INVALID_STATUS, row=int(row)))
    for row, col in zip(*np.nonzero(~np.isfinite(dataset.covariates))):
        violations.append(Violation(codes.NON_FINITE_COVARIATE, row=int(row), col=dataset.labels[col]))
    if dataset.n < 2:
        violations.append(Violation(codes.TOO_FEW_SUBJECTS))
    if not np.any(dataset.status == 1):
        violations.append(Violation(codes.NO_EVENTS))

    return ValidationReport(violations)


def standardize(dataset, mode=consts.StandardizeModes.NONE):
    """
    Centers or z-scores covariate columns
    :param dataset: SurvivalDataset
    :param mode: str, one of none, center, zscore
    :return: tuple(SurvivalDataset, ScalingInfo)
    """

    if mode not in consts.StandardizeModes.ALL:
        raise exceptions.DataError('Unknown standardize mode "{}"'.format(mode))
    if mode == consts.StandardizeModes.NONE:
        return dataset, ScalingInfo.identity(dataset.p)

    covariates = dataset.covariates
    centers = covariates.mean(axis=0)
    scales = np.ones(dataset.p)
    if mode == consts.StandardizeModes.ZSCORE:
        scales = covariates.std(axis=0, ddof=1)
        for column in np.flatnonzero(~(scales > 0)):
            raise exceptions.ConstantColumnError(dataset.labels[column])

    transformed = (covariates - centers) / scales

    return dataset.with_covariates(transformed), ScalingInfo(centers, scales)


def risk_index(dataset):
    """
    Sorts subjects by time and groups ties (Breslow: tied subjects share a risk set)
    :param dataset: SurvivalDataset
    :return: RiskIndex
    """

    order = np.argsort(dataset.times, kind='stable')
    sorted_times = dataset.times[order]
    new_group = np.ones(sorted_times.shape[0], dtype=bool)
    new_group[1:] = sorted_times[1:] != sorted_times[:-1]
    group_start = np.maximum.accumulate(np.where(new_group, np.arange(sorted_times.shape[0]), 0))

    return RiskIndex(order, sorted_times, dataset.status[order], group_start)
