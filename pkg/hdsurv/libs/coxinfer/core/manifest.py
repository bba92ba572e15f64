#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Module that contains the run manifest recorded next to every command output, and the JSON / CSV writers that
stamp each output with the manifest digest
"""

from __future__ import print_function, division, absolute_import

import os
import sys
import json
import time
import hashlib
import logging
import contextlib

import numpy as np

from hdsurv.libs.coxinfer import __version__
from hdsurv.libs.coxinfer.core import consts

logger = logging.getLogger(consts.LIB_ID)

MANIFEST_FILE_NAME = 'manifest.json'


def to_plain(value):
    """
    Converts numpy values and containers into JSON friendly objects; non finite floats become None
    """

    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def dumps(document):
    # repr based float formatting is shortest round-trip, i.e. at most 17 significant digits
    return json.dumps(to_plain(document), indent=2, sort_keys=True, allow_nan=False)


def file_digest(path, block_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for block in iter(lambda: fh.read(block_size), b''):
            digest.update(block)
    return digest.hexdigest()


class RunManifest(object):
    """
    Command, resolved configuration, seeds, library version and input digests of one run. Stage timings are
    recorded but left out of the digest so identical re-runs share it
    """

    def __init__(self, command, configuration=None, seeds=None, inputs=None):
        self.command = command
        self.configuration = to_plain(configuration or dict())
        self.seeds = to_plain(seeds or dict())
        self.version = __version__.get_version()
        self.inputs = dict()
        self.timings = dict()
        for path in inputs or list():
            self.add_input(path)

    def __repr__(self):
        return '[{} - {}: {}]'.format(self.__class__.__name__, self.command, self.digest[:12])

    def add_input(self, path):
        self.inputs[os.path.basename(path)] = file_digest(path)

    @contextlib.contextmanager
    def stage(self, name):
        """
        Times the wrapped block and logs it
        :param name: str
        """

        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start
            logger.info('{} finished in {:.3f}s'.format(name, self.timings[name]))

    def identity(self):
        return {
            'schema_version': consts.SCHEMA_VERSION,
            'library': consts.LIB_ID,
            'version': self.version,
            'command': self.command,
            'configuration': self.configuration,
            'seeds': self.seeds,
            'inputs': self.inputs,
            'python': '{}.{}'.format(*sys.version_info[:2]),
        }

    @property
    def digest(self):
        return hashlib.sha256(dumps(self.identity()).encode('utf-8')).hexdigest()

    def as_dict(self):
        document = self.identity()
        document['digest'] = self.digest
        document['timings'] = dict(self.timings)
        return document

    def write(self, directory):
        path = os.path.join(directory, MANIFEST_FILE_NAME)
        with open(path, 'w') as fh:
            fh.write(dumps(self.as_dict()))
        return path


def write_json(path, document, manifest):
    """
    Writes a schema-versioned JSON document stamped with the manifest digest
    :return: str, path
    """

    payload = dict(document)
    payload['schema_version'] = consts.SCHEMA_VERSION
    payload['manifest_digest'] = manifest.digest
    with open(path, 'w') as fh:
        fh.write(dumps(payload))
    logger.debug('Wrote {}'.format(path))
    return path


def write_csv(path, frame, manifest):
    """
    Writes a pandas DataFrame with 17 significant digits and a trailing manifest_digest column
    :return: str, path
    """

    frame = frame.copy()
    frame['manifest_digest'] = manifest.digest
    frame.to_csv(path, index=False, float_format=consts.FLOAT_FORMAT)
    logger.debug('Wrote {}'.format(path))
    return path
