# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np

from .attack_utils import BUDGET_ATOL, within_budget
from .loss import objective_gradient


@within_budget
def mifgsm(model, x, cfg):
    """Momentum iterative FGSM without per-step clipping.

    The accumulated direction is g <- decay * g + grad / ||grad||_1, per sample, and each
    step moves by beta * sign(g). A zero gradient contributes only the momentum term.

    Arguments:
        model (ModelParams): attacked model
        x (ndarray): (2KL,) or (N, 2KL) clean positions in meters
        cfg (AttackConfig): epsilon, decay, iterations, beta and objective

    Returns:
        (ndarray): adversarial positions, within beta * iterations of x
    """
    if cfg.beta * cfg.iterations > cfg.epsilon + BUDGET_ATOL:
        raise ValueError(
            f"MI-FGSM needs beta * iterations <= epsilon, got {cfg.beta} * "
            f"{cfg.iterations} > {cfg.epsilon}."
        )
    x = np.asarray(x, dtype=np.float64)
    x_adv = x.copy()
    momentum = np.zeros_like(x)
    for _ in range(cfg.iterations):
        grad = objective_gradient(model, x_adv, cfg.objective)
        l1 = np.sum(np.abs(grad), axis=-1, keepdims=True)
        normalized = np.divide(grad, l1, out=np.zeros_like(grad), where=l1 > 0)
        momentum = cfg.decay * momentum + normalized
        x_adv = x_adv + cfg.beta * np.sign(momentum)
    return x_adv
