#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains tests for debiasing, confidence intervals and Wald / chi-square tests
"""

import numpy as np
import pytest

from hdsurv.libs.coxinfer.core import exceptions
from hdsurv.libs.coxinfer.core import inference
from hdsurv.libs.coxinfer.core.data import ScalingInfo
from hdsurv.libs.coxinfer.core.theta import ThetaHat

B = np.array([0.6, -0.1])
THETA = 2.0 * np.eye(2)
N = 100


def test_debias():
    b = inference.debias([1.0, 0.0], np.eye(2), [0.5, -0.5])
    np.testing.assert_allclose(b, [0.5, 0.5])


def test_debias_with_zero_score_keeps_estimate():
    np.testing.assert_array_equal(inference.debias([0.3, -0.2], THETA, [0.0, 0.0]), [0.3, -0.2])


def test_debias_dimension_mismatch():
    with pytest.raises(exceptions.DimensionMismatchError):
        inference.debias([1.0, 0.0], np.eye(3), [0.5, -0.5])


def test_infer_coordinates():
    result = inference.infer(B, ThetaHat(THETA, 0.0), np.zeros(2), N)

    np.testing.assert_allclose(result.std_errors, np.sqrt(0.02))
    assert result.ci_lower[0] == pytest.approx(0.32282, abs=1e-5)
    assert result.ci_upper[0] == pytest.approx(0.87718, abs=1e-5)
    assert result.coordinate(0)['ci'] == (result.ci_lower[0], result.ci_upper[0])
    assert result.p_values[0] < result.p_values[1]


def test_infer_non_positive_diagonal():
    with pytest.raises(exceptions.NonPositiveVarianceError):
        inference.infer(B, np.diag([1.0, 0.0]), np.zeros(2), N)


def test_ci_linear():
    lower, upper = inference.ci_linear(B, THETA, N, [1.0, 0.0])

    assert lower == pytest.approx(0.6 - 1.959964 * 0.141421, abs=1e-5)
    assert upper == pytest.approx(0.6 + 1.959964 * 0.141421, abs=1e-5)


def test_ci_linear_non_positive_variance():
    with pytest.raises(exceptions.NonPositiveVarianceError):
        inference.ci_linear(B, np.diag([1.0, -1.0]), N, [0.0, 1.0])


def test_wald_test_is_dual_to_interval():
    c = np.array([1.0, -1.0])
    lower, upper = inference.ci_linear(B, THETA, N, c)

    assert not inference.wald_test(B, THETA, N, c, a0=upper - 1e-6).reject
    assert inference.wald_test(B, THETA, N, c, a0=upper + 1e-6).reject
    assert not inference.wald_test(B, THETA, N, c, a0=lower + 1e-6).reject
    assert inference.wald_test(B, THETA, N, c, a0=lower - 1e-6).reject


def test_wald_test_values():
    test = inference.wald_test(B, THETA, N, [1.0, 0.0])

    assert test.statistic == pytest.approx(0.6 / np.sqrt(0.02))
    assert test.p_value < 1e-4
    assert test.reject
    document = test.as_dict()
    assert document['kind'] == 'wald'
    assert document['df'] == 1


def test_chisq_with_one_row_matches_wald():
    c = np.array([1.0, 1.0])
    wald = inference.wald_test(B, THETA, N, c, a0=0.3)
    chisq = inference.chisq_test(B, THETA, N, [c], a0=[0.3])

    assert chisq.df == 1
    assert chisq.statistic == pytest.approx(wald.statistic ** 2)
    assert chisq.p_value == pytest.approx(wald.p_value)
    assert chisq.reject == wald.reject


def test_chisq_confidence_region():
    test = inference.chisq_test(B, THETA, N, np.eye(2))

    assert test.df == 2
    assert test.reject
    assert test.contains(B)
    assert not test.contains([0.0, 0.0])
    assert test.as_dict()['kind'] == 'chisq'


def test_chisq_rank_deficient():
    with pytest.raises(exceptions.RankDeficientError):
        inference.chisq_test(B, THETA, N, [[1.0, 1.0], [2.0, 2.0]])


def test_chisq_non_positive_definite():
    with pytest.raises(exceptions.NonPdFError):
        inference.chisq_test(B, np.diag([0.0, 1.0]), N, [[1.0, 0.0]])


def test_chisq_dimension_mismatch():
    with pytest.raises(exceptions.DimensionMismatchError):
        inference.chisq_test(B, THETA, N, [[1.0, 0.0, 0.0]])


def test_wald_table_maps_to_original_scale():
    scaling = ScalingInfo([0.0, 0.0], [2.0, 1.0])
    table = inference.wald_table(['age', 'dose'], [0.5, -0.2], [0.1, 0.1], scaling=scaling)
    age = table.rows[0]

    assert age['estimate'] == pytest.approx(0.25)
    assert age['se'] == pytest.approx(0.05)
    assert age['statistic'] == pytest.approx(5.0)
    assert age['hazard_ratio'] == pytest.approx(np.exp(0.25))
    assert age['hr_lower'] < age['hazard_ratio'] < age['hr_upper']


def test_wald_table_rejects_bad_standard_errors():
    with pytest.raises(exceptions.NonPositiveVarianceError):
        inference.wald_table(['a'], [0.5], [0.0])
    with pytest.raises(exceptions.DimensionMismatchError):
        inference.wald_table(['a', 'b'], [0.5], [0.1])


def test_report_table_sorting_and_json():
    result = inference.infer(B, THETA, np.zeros(2), N)
    table = inference.report_table(result, ['x1', 'x2'])
    ordered = table.sorted_by_p_value()

    assert [row['label'] for row in ordered.rows] == ['x1', 'x2']
    assert list(table.to_frame().columns) == list(inference.CoefficientTable.COLUMNS)
    restored = inference.CoefficientTable.from_json(table.to_json())
    assert restored.rows == table.rows
    assert restored.alpha == table.alpha
