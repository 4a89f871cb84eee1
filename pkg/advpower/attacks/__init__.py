# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

# make flake8 unused names in this file.
# flake8: noqa: F401

from .attack_utils import (
    ATTACK_KINDS,
    OBJECTIVES,
    AttackConfig,
    check_ball,
    d_eps_cm,
    within_budget,
)
from .loss import attack_loss, objective_gradient
from .fgsm import fgsm
from .pgdm import pgdm
from .mifgsm import mifgsm
from .random_perturb import random_perturb
from .evaluate import (
    REPORT_COLUMNS,
    AttackReport,
    count_infeasible,
    craft,
    default_configs,
    evaluate_attack,
    recount_infeasible,
)
