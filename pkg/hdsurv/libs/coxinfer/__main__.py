#! /usr/bin/env python
# -*- coding: utf-8 -*-

"""
Allows running the command line with python -m hdsurv.libs.coxinfer
"""

from __future__ import print_function, division, absolute_import

import sys

from hdsurv.libs.coxinfer.cli import main

if __name__ == '__main__':
    sys.exit(main())
