#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Initialization module for hdsurv-libs-coxinfer
"""

from __future__ import print_function, division, absolute_import

import os
import logging.config


def get_logs_directory():
    """
    Returns the folder where hdsurv-libs-coxinfer log files are stored
    :return: str
    """

    return os.path.normpath(
        os.getenv('HDSURV_LOG_DIR', os.path.join(os.path.expanduser('~'), 'hdsurv', 'logs', 'libs')))


def create_logger(dev=False):
    """
    Creates logger for current hdsurv-libs-coxinfer package
    """

    logger_directory = get_logs_directory()
    if not os.path.isdir(logger_directory):
        os.makedirs(logger_directory)

    logging_config = os.path.normpath(os.path.join(os.path.dirname(__file__), '__logging__.ini'))

    logging.config.fileConfig(logging_config, disable_existing_loggers=False)
    logger = logging.getLogger('hdsurv-libs-coxinfer')
    dev = os.getenv('HDSURV_DEV', dev)
    if dev:
        logger.setLevel(logging.DEBUG)
        for handler in logger.handlers:
            handler.setLevel(logging.DEBUG)

    return logger


create_logger()
