#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Version module for hdsurv-libs-coxinfer
"""

from __future__ import print_function, division, absolute_import

__version__ = None


def get_version():
    global __version__
    if __version__:
        return __version__

    from importlib import metadata
    from hdsurv.libs.coxinfer.core import consts
    try:
        __version__ = metadata.version(consts.LIB_ID)
    except metadata.PackageNotFoundError:
        __version__ = consts.FALLBACK_VERSION

    return __version__
