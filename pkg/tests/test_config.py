#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains tests for scenario files, bundled presets and the run manifest
"""

import os
import json

import numpy as np
import pandas as pd
import pytest

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core import config as config_utils
from hdsurv.libs.coxinfer.core import manifest


def test_bundled_presets():
    assert config_utils.presets() == ['gamma_sweep', 'methods_p100', 'methods_p50', 'null_p20']


@pytest.mark.parametrize('name', ['gamma_sweep', 'methods_p100', 'methods_p50', 'null_p20'])
def test_presets_load(name):
    config = config_utils.load_config(name)

    assert config.name == name
    assert config.n == 500
    assert config.targets_for()


@pytest.mark.parametrize('alias, name', [
    ('fig1.toml', 'gamma_sweep'), ('fig2_p100.toml', 'methods_p100'), ('fig2_p50', 'methods_p50')])
def test_preset_aliases(alias, name):
    assert config_utils.resolve_config_path(alias) == os.path.join(config_utils.CONFIGS_DIRECTORY, name + '.toml')
    assert config_utils.load_config(alias).name == name


def test_method_comparison_preset():
    config = config_utils.load_config('methods_p100')

    assert config.methods == consts.Methods.ALL
    assert config.censoring == consts.CensoringKinds.UNIFORM
    np.testing.assert_array_equal(config.support, [0, 20, 40, 60, 80])


def test_gamma_sweep_preset():
    config = config_utils.load_config('gamma_sweep')

    assert config.gamma_sweep_relative
    assert config.gamma_sweep == consts.GAMMA_MULTIPLIERS
    np.testing.assert_array_equal(config.beta0[:3], [1.0, 0.3, 0.0])


def test_null_preset_targets():
    targets = config_utils.load_config('null_p20').targets_for()

    assert [target.name for target in targets] == ['x2', 'x3', 'x2-x3']
    assert all(float(target.loading @ config_utils.load_config('null_p20').beta0) == 0.0 for target in targets)


def test_load_config_overrides(tmp_path):
    path = tmp_path / 'small.toml'
    path.write_text('n = 100\np = 10\n\n[censoring]\nkind = "exponential"\nrate = 0.5\n')
    config = config_utils.load_config(str(path), replications=3, seed=None)

    assert config.name == 'small'
    assert config.replications == 3
    assert config.seed == consts.DEFAULT_SEED
    assert config.censoring_rate == 0.5


def test_load_config_missing():
    with pytest.raises(IOError):
        config_utils.load_config('no_such_preset')


def test_load_config_invalid_toml(tmp_path):
    path = tmp_path / 'broken.toml'
    path.write_text('n = [1, \n')
    with pytest.raises(exceptions.ConfigError):
        config_utils.load_config(str(path))


def test_load_config_unknown_key(tmp_path):
    path = tmp_path / 'typo.toml'
    path.write_text('replication = 3\n')
    with pytest.raises(exceptions.ConfigError):
        config_utils.load_config(str(path))


def test_manifest_digest_ignores_timings(tmp_path):
    first = manifest.RunManifest('fit', {'lam': 0.1}, seeds={'folds': 1})
    second = manifest.RunManifest('fit', {'lam': 0.1}, seeds={'folds': 1})
    with first.stage('load'):
        pass

    assert 'load' in first.timings
    assert first.digest == second.digest
    assert manifest.RunManifest('fit', {'lam': 0.2}, seeds={'folds': 1}).digest != first.digest

    path = first.write(str(tmp_path))
    with open(path) as fh:
        document = json.load(fh)
    assert document['digest'] == first.digest
    assert document['schema_version'] == consts.SCHEMA_VERSION


def test_manifest_input_digest(tmp_path):
    path = tmp_path / 'input.csv'
    path.write_text('time,status\n1,1\n')
    run_manifest = manifest.RunManifest('fit', inputs=[str(path)])

    assert run_manifest.inputs == {'input.csv': manifest.file_digest(str(path))}
    path.write_text('time,status\n2,1\n')
    assert manifest.RunManifest('fit', inputs=[str(path)]).digest != run_manifest.digest


def test_write_json_replaces_non_finite_values(tmp_path):
    run_manifest = manifest.RunManifest('simulate')
    path = manifest.write_json(
        str(tmp_path / 'out.json'), {'coverage': np.nan, 'values': np.array([1.0, np.inf])}, run_manifest)
    with open(path) as fh:
        document = json.load(fh)

    assert document['coverage'] is None
    assert document['values'] == [1.0, None]
    assert document['manifest_digest'] == run_manifest.digest


def test_write_csv_keeps_full_precision(tmp_path):
    run_manifest = manifest.RunManifest('bench')
    value = 0.1 + 0.2
    path = manifest.write_csv(str(tmp_path / 'out.csv'), pd.DataFrame({'x': [value]}), run_manifest)
    frame = pd.read_csv(path, float_precision='round_trip')

    assert frame['x'][0] == value
    assert frame['manifest_digest'][0] == run_manifest.digest
    assert os.path.isfile(path)
