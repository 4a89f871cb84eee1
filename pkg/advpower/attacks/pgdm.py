# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np

from .attack_utils import check_ball, within_budget
from .loss import objective_gradient


@within_budget
def pgdm(model, x, cfg):
    """Projected gradient sign ascent clipped to the epsilon ball after every step.

    Starts at x (no random start) and runs cfg.steps steps of size cfg.alpha.

    Arguments:
        model (ModelParams): attacked model
        x (ndarray): (2KL,) or (N, 2KL) clean positions in meters
        cfg (AttackConfig): epsilon, alpha, steps and objective

    Returns:
        (ndarray): adversarial positions
    """
    x = np.asarray(x, dtype=np.float64)
    lower, upper = x - cfg.epsilon, x + cfg.epsilon
    x_adv = x.copy()
    for _ in range(cfg.steps):
        grad = objective_gradient(model, x_adv, cfg.objective)
        x_adv = np.clip(x_adv + cfg.alpha * np.sign(grad), lower, upper)
        check_ball(x_adv, x, cfg.epsilon)
    return x_adv
