# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np

from .attack_utils import within_budget
from .loss import objective_gradient


@within_budget
def fgsm(model, x, epsilon, objective="infeasible"):
    """Fast gradient sign method, one step of size epsilon.

    Equation:
        .. math::

            x_{adv} = x + \\epsilon \\, \\mathrm{sign}(\\nabla_x \\mathcal{L}(x))

    Arguments:
        model (ModelParams): attacked model
        x (ndarray): (2KL,) or (N, 2KL) clean positions in meters
        epsilon (float): L-inf budget in meters
        objective (str): "infeasible" or "min_power"

    Returns:
        (ndarray): adversarial positions, with sign(0) = 0
    """
    x = np.asarray(x, dtype=np.float64)
    return x + epsilon * np.sign(objective_gradient(model, x, objective))
