#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Shared fixtures for hdsurv-libs-coxinfer tests
"""

import numpy as np
import pytest

from hdsurv.libs.coxinfer.core.data import SurvivalDataset


def make_dataset(n, p, beta=None, seed=0, censor_high=4.0, round_times=None):
    """
    Exponential event times with rate exp(X.T beta) and Uniform(0, censor_high) censoring
    """

    rng = np.random.default_rng(seed)
    covariates = rng.standard_normal((n, p))
    beta = np.zeros(p) if beta is None else np.asarray(beta, dtype=float)
    event_times = rng.exponential(1.0 / np.exp(covariates @ beta))
    censor_times = rng.uniform(0.0, censor_high, n)
    times = np.minimum(event_times, censor_times)
    if round_times is not None:
        times = np.round(times, round_times)
    status = (event_times <= censor_times).astype(float)
    return SurvivalDataset(times, status, covariates)


@pytest.fixture
def hand_dataset():
    """
    n = 3, p = 1: X = (1, 0, -1), Y = (1, 2, 3), delta = (1, 1, 0)
    """

    return SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 0], [[1.0], [0.0], [-1.0]])


@pytest.fixture
def crossed_dataset():
    """
    Same times and status as hand_dataset with X = (0, 1, -1); the partial likelihood has a finite maximum
    """

    return SurvivalDataset([1.0, 2.0, 3.0], [1, 1, 0], [[0.0], [1.0], [-1.0]])


@pytest.fixture
def small_dataset():
    return make_dataset(200, 5, beta=[0.8, -0.5, 0.0, 0.0, 0.3], seed=11)


@pytest.fixture
def tied_dataset():
    return make_dataset(60, 3, beta=[0.5, 0.0, -0.5], seed=3, round_times=1)


@pytest.fixture
def wide_dataset():
    return make_dataset(150, 12, beta=[1.0] + [0.0] * 10 + [0.5], seed=5, censor_high=6.0)
