# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

# Sphinx configuration for the advpower documentation.

import sys

sys.path.insert(0, "..")

project = "advpower"
copyright = "2024, advpower Project Developers"
author = "advpower Project Developers"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx_click",
    "sphinx_rtd_theme",
]

source_suffix = [".rst"]
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

# equations in docstrings use .. math:: blocks
mathjax3_config = {"tex": {"inlineMath": [["\\(", "\\)"]]}}

html_theme = "sphinx_rtd_theme"
html_theme_options = {"navigation_depth": 3, "collapse_navigation": False}
