# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

__version_info__ = ("2024", "6", "0")
__version__ = ".".join(__version_info__)
