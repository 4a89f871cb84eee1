# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np

from .attack_utils import within_budget


@within_budget
def random_perturb(x, epsilon, seed):
    """Move every coordinate by +epsilon or -epsilon with equal probability.

    Arguments:
        x (ndarray): clean positions in meters
        epsilon (float): displacement in meters
        seed (int): seed of the signs

    Returns:
        (ndarray): perturbed positions
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.random.default_rng(seed).standard_normal(x.shape)
    return x + epsilon * np.sign(w)
