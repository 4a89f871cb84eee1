# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np

from ..neuralnet import forward, input_gradient
from .attack_utils import OBJECTIVES


def attack_loss(model, x):
    """Sum of the first K raw outputs in mW, the predicted total power of the cell.

    Arguments:
        model (ModelParams): attacked model
        x (ndarray): (2KL,) or (N, 2KL) positions in meters

    Returns:
        (float or ndarray): predicted cell power, no clamping
    """
    return np.sum(forward(model, x)[..., : model.n_powers], axis=-1)


def objective_gradient(model, x, objective="infeasible"):
    """Input gradient of the attacker's objective in mW per meter."""
    if objective not in OBJECTIVES:
        raise ValueError(f"Value passed to 'objective' must be one of {OBJECTIVES}.")
    grad = input_gradient(model, x)
    return grad if objective == "infeasible" else -grad
