#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Copyright (C) the haloscope_qfi developers (2026)
#
# This file is part of haloscope_qfi.
#
# haloscope_qfi is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# haloscope_qfi is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with haloscope_qfi.  If not, see <http://www.gnu.org/licenses/>.

"""Setup the haloscope_qfi package
"""

# ignore all invalid names (pylint isn't good at looking at executables)
# pylint: disable=invalid-name

import os
import re

from setuptools import setup, find_packages


def get_version(package="haloscope_qfi"):
    """Read ``__version__`` from ``_version.py`` without importing the package"""
    with open(os.path.join(package, "_version.py")) as f:
        return re.search(r'__version__ = "([^"]+)"', f.read()).group(1)


# -- dependencies -------------------------------------------------------------

# package dependencies
install_requires = [
    "numpy",
    "pandas",
    "pyyaml",
    "scipy",
    "simplejson",
]

# For documenation
extras_require = {
    'doc': [
        'ipython',
        'sphinx',
        'numpydoc',
        'sphinx_rtd_theme',
        'sphinxcontrib_programoutput',
    ],
}

# test dependencies
tests_require = [
    "pytest>=3.1",
]

# -- run setup ----------------------------------------------------------------

setup(
    # metadata
    name="haloscope_qfi",
    provides=["haloscope_qfi"],
    version=get_version(),
    description="Quantum Fisher information of noise sensing for axion haloscopes",
    long_description=(
        "haloscope_qfi computes quantum and classical Fisher information about "
        "the added noise of phase-covariant bosonic channels and maps it to "
        "axion haloscope scan rates"
    ),
    license="GPLv3",
    # package content
    packages=find_packages(),
    package_data={"haloscope_qfi": ["config.defaults.yaml"]},
    include_package_data=False,
    entry_points={
        "console_scripts": ["haloscope-qfi=haloscope_qfi.cli:main"],
    },
    python_requires=">=3.7",
    # dependencies
    install_requires=install_requires,
    tests_require=tests_require,
    extras_require=extras_require,
    # classifiers
    classifiers=[
        "Development Status :: 4 - Beta",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.7",
        "Programming Language :: Python :: 3.8",
        "Intended Audience :: Science/Research",
        "Natural Language :: English",
        "Topic :: Scientific/Engineering",
        "Topic :: Scientific/Engineering :: Physics",
        "Operating System :: POSIX",
        "Operating System :: Unix",
        "Operating System :: MacOS",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
    ],
)
