# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

from dataclasses import asdict, dataclass, fields
from functools import wraps
import inspect
import math

import numpy as np

from ..utils import (
    BudgetViolationError,
    InvalidConfigError,
    check_positive,
    check_unknown_keys,
)

ATTACK_KINDS = ("fgsm", "pgdm", "mifgsm", "random")
OBJECTIVES = ("infeasible", "min_power")

# Slack of the L-inf budget check against rounding in x + eps.
BUDGET_ATOL = 1e-12

# Attacks only move UEs by a fraction of a meter.
MAX_EPSILON = 0.5


@dataclass(frozen=True)
class AttackConfig:
    """Settings of one attack.

    Attributes:
        kind (str): "fgsm", "pgdm", "mifgsm" or "random"
        epsilon (float): L-inf budget in meters, 0 <= epsilon < 0.5
        alpha (float): PGDM step in meters
        steps (int): PGDM iterations
        decay (float): MI-FGSM momentum decay
        iterations (int): MI-FGSM iterations
        beta (float): MI-FGSM step in meters, epsilon / iterations when None
        objective (str): "infeasible" raises the predicted cell power, "min_power"
            lowers it
        seed (int): seed of the random perturbation
    """

    kind: str = "pgdm"
    epsilon: float = 0.1
    alpha: float = 0.01
    steps: int = 40
    decay: float = 0.1
    iterations: int = 10
    beta: float = None
    objective: str = "infeasible"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise InvalidConfigError(
                f"Value passed to 'kind' must be one of {ATTACK_KINDS}, got '{self.kind}'."
            )
        if self.objective not in OBJECTIVES:
            raise InvalidConfigError(
                f"Value passed to 'objective' must be one of {OBJECTIVES}."
            )
        if not 0 <= self.epsilon < MAX_EPSILON:
            raise InvalidConfigError(
                f"Value passed to 'epsilon' must lie in [0, {MAX_EPSILON}), got {self.epsilon}."
            )
        check_positive("alpha", self.alpha)
        check_positive("decay", self.decay, allow_zero=True)
        for name in ("steps", "iterations"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidConfigError(
                    f"Value passed to '{name}' must be a positive integer, got {value}."
                )
        if self.beta is None:
            object.__setattr__(self, "beta", self.epsilon / self.iterations)
        check_positive("beta", self.beta, allow_zero=self.epsilon == 0)

    @property
    def d_eps(self):
        """Largest Euclidean displacement of one UE in meters."""
        return math.sqrt(2) * self.epsilon

    @property
    def d_eps_cm(self):
        return d_eps_cm(self.epsilon)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        check_unknown_keys("attack", data, [f.name for f in fields(cls)])
        return cls(**data)


def d_eps_cm(epsilon):
    """Largest UE displacement sqrt(2) * epsilon in cm, truncated to two decimals."""
    return math.floor(100 * math.sqrt(2) * epsilon * 100) / 100


def check_ball(x_adv, x, epsilon):
    """Raise a BudgetViolationError when x_adv leaves the L-inf ball around x."""
    gap = np.max(np.abs(np.asarray(x_adv) - x), initial=0.0)
    if gap > epsilon + BUDGET_ATOL:
        raise BudgetViolationError(
            f"Adversarial input moved {gap} m, beyond the budget of {epsilon} m."
        )


def within_budget(func):
    """Python decorator that checks an attack's output against its L-inf budget.

    The budget is the 'epsilon' argument of the attack, or the epsilon of its 'cfg'.
    """
    signature = inspect.signature(func)

    @wraps(func)
    def wrapper(*args, **kwargs):
        bound = signature.bind(*args, **kwargs)
        x_adv = func(*args, **kwargs)
        if "epsilon" in bound.arguments:
            epsilon = bound.arguments["epsilon"]
        else:
            epsilon = bound.arguments["cfg"].epsilon
        check_ball(x_adv, np.asarray(bound.arguments["x"], dtype=np.float64), epsilon)
        return x_adv

    return wrapper
