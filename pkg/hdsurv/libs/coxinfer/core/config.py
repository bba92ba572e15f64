#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains functions to load simulation scenarios from TOML files and to locate the bundled presets
"""

from __future__ import print_function, division, absolute_import

import os
import sys
import logging

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from hdsurv.libs.coxinfer.core import consts, exceptions
from hdsurv.libs.coxinfer.core.simulation import SimConfig

logger = logging.getLogger(consts.LIB_ID)

CONFIGS_DIRECTORY = os.path.normpath(os.path.join(os.path.dirname(os.path.dirname(__file__)), 'configs'))


def presets():
    """
    Returns the names of the bundled scenario files, without extension
    :return: list(str)
    """

    if not os.path.isdir(CONFIGS_DIRECTORY):
        return list()

    return sorted(os.path.splitext(name)[0] for name in os.listdir(CONFIGS_DIRECTORY) if name.endswith('.toml'))


def resolve_config_path(path_or_name):
    """
    Returns path_or_name when it is an existing file, or the bundled preset with that name (or alias)
    :param path_or_name: str
    :return: str
    """

    if os.path.isfile(path_or_name):
        return path_or_name

    name = os.path.splitext(os.path.basename(path_or_name))[0]
    name = consts.PRESET_ALIASES.get(name, name)
    preset = os.path.join(CONFIGS_DIRECTORY, '{}.toml'.format(name))
    if os.path.isfile(preset):
        return preset

    raise IOError('Configuration file not found: {}'.format(path_or_name))


def read_toml(path):
    with open(path, 'rb') as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise exceptions.ConfigError('Invalid TOML in {}: {}'.format(path, exc))


def load_config(path_or_name, **overrides):
    """
    Loads a simulation scenario from a TOML file or a bundled preset name. Overrides with a None value are ignored
    :param path_or_name: str
    :return: SimConfig
    """

    path = resolve_config_path(path_or_name)
    document = read_toml(path)
    document.setdefault('name', os.path.splitext(os.path.basename(path))[0])
    config = SimConfig.from_dict(document)

    overrides = {key: value for key, value in overrides.items() if value is not None}
    if overrides:
        config = config.replace(**overrides)
    logger.debug('Loaded {} from {}'.format(config, path))

    return config
