# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import pandas as pd

from ..version import __version__


class ReportRenderer:
    """Plain-text rendering of report tables for the terminal.

    Arguments:
        precision (int): digits after the decimal point of float columns
    """

    def __init__(self, precision=4):
        self.precision = precision

    # pylint: disable=W1401
    def render_preamble(self):
        """Version banner, printed once above the consolidated report."""
        lines = [
            r"            _                                    ",
            r"   __ _  __| |_   ___ __   _____      _____ _ __ ",
            r"  / _` |/ _` \ \ / / '_ \ / _ \ \ /\ / / _ \ '__|",
            r" | (_| | (_| |\ V /| |_) | (_) \ V  V /  __/ |   ",
            r"  \__,_|\__,_| \_/ | .__/ \___/ \_/\_/ \___|_|   ",
            r"                   |_|                       {:>2}".format(
                "v" + __version__
            ),
            r"",
            r"",
        ]
        return "\n".join(lines)

    def render(self, dataframe, title=None, only_aggregate=False):
        """Render a report DataFrame.

        Arguments:
            dataframe (DataFrame): attack, transfer or consolidated report rows
            title (str, optional): line printed above the table
            only_aggregate (bool): keep only the rows with cell 'all'

        Returns:
            (str): the rendered text
        """
        result = "" if title is None else title + "\n"
        if only_aggregate and "cell" in dataframe.columns:
            dataframe = dataframe[dataframe["cell"].astype(str) == "all"]
        if len(dataframe) == 0:
            return result + "The report is empty.\n"
        with pd.option_context("display.precision", self.precision):
            result += dataframe.to_string(index=False)
        return result + "\n"
