"""Copyright 2026 The polyattack Authors.

All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.

Setup script for polyattack, a toolkit for adversarial attacks that target
some concept classifiers while protecting others.
"""
from setuptools import setup
import version  # Needs to be a relative import.

ENTRY_POINTS = {
    'console_scripts': [
        'polyattack = polyattack.cli:main',
    ],
}

setup(
    name='polyattack',
    version=version.__version__,
    author='The polyattack Authors',
    license='Apache License',
    description='Multi-concept adversarial attacks on concept classifiers',
    long_description='polyattack crafts perturbations that flip the '
    'predictions of attacked concept classifiers while keeping protected '
    'classifiers unchanged, for linear models (exact LP and dual solvers) '
    'and small networks (projected gradient ascent), and reports accuracy, '
    'recall and attribution shifts per concept.',
    python_requires='>=3.6',
    install_requires=[
        'absl-py',
        'cryptography>=2.5',
        'numpy>=1.17',
        'scipy>=1.2',
    ],
    setup_requires=['pytest-runner'],
    tests_require=[
        'pytest',
        'absl-py',
        'mock>=3.0.5',
    ],
    entry_points=ENTRY_POINTS,
    package_dir={'polyattack': ''},
    packages=['polyattack'],
)
