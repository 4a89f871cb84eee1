# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

from setuptools import setup
from codecs import open
from os import path


def readme():
    here = path.abspath(path.dirname(__file__))
    with open(path.join(here, "README.md"), encoding="utf-8") as f:
        return f.read()


# Get the version in a safe way which does not reference advpower `__init__` file
# per python docs: # https://packaging.python.org/guides/single-sourcing-package-version/
version = {}
with open("./advpower/version.py") as fp:
    exec(fp.read(), version)


setup(
    name="advpower",
    version=version["__version__"],
    license="MIT",
    description="Adversarial attacks and defenses for DNN-based massive MIMO power allocation",
    long_description=readme(),
    long_description_content_type="text/markdown",
    keywords="massive MIMO, power allocation, adversarial examples, neural networks",
    python_requires=">=3.8",
    packages=[
        "advpower",
        "advpower.attacks",
        "advpower.external",
    ],
    include_package_data=True,
    install_requires=[
        "scipy",
        "numpy < 2.0.0",
        "pandas >= 1.1",
        "tqdm",
        "more-itertools",
        "click",
    ],
    entry_points={
        "console_scripts": ["advpower=advpower.cli:main"],
    },
)
