# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from .. import helpers
from ..neuralnet import forward
from .attack_utils import AttackConfig, d_eps_cm
from .fgsm import fgsm
from .loss import attack_loss
from .mifgsm import mifgsm
from .pgdm import pgdm
from .random_perturb import random_perturb

REPORT_COLUMNS = ["cell", "attack", "epsilon", "d_eps_cm", "n", "infeasible", "rate"]


def craft(model, x, cfg, cell=0):
    """Adversarial positions of the attack named by cfg.kind.

    Arguments:
        model (ModelParams): attacked model, unused by the random perturbation
        x (ndarray): (2KL,) or (N, 2KL) clean positions
        cfg (AttackConfig): attack settings
        cell (int): cell index, keys the random perturbation seed

    Returns:
        (ndarray): adversarial positions
    """
    if cfg.kind == "fgsm":
        return fgsm(model, x, cfg.epsilon, objective=cfg.objective)
    if cfg.kind == "pgdm":
        return pgdm(model, x, cfg)
    if cfg.kind == "mifgsm":
        return mifgsm(model, x, cfg)
    return random_perturb(x, cfg.epsilon, helpers._derive_seed(cfg.seed, "random", cell))


def count_infeasible(model, x, p_max):
    """Number of inputs whose predicted cell power exceeds p_max (strict)."""
    return int(np.sum(attack_loss(model, np.atleast_2d(x)) > p_max))


@dataclass
class AttackReport:
    """Per-cell infeasible counts of one attack setting.

    Attributes:
        attack (str): attack kind
        epsilon (float): L-inf budget in meters
        n (int): attacked samples per cell
        infeasible (ndarray): (L,) infeasible counts
        model_id (str): identifies the attacked models
        objective (str): attacker objective
        adversarial (list): per-cell (n, 2KL) adversarial positions, optional
    """

    attack: str
    epsilon: float
    n: int
    infeasible: np.ndarray
    model_id: str = ""
    objective: str = "infeasible"
    adversarial: list = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.infeasible = np.asarray(self.infeasible, dtype=np.int64)
        if self.n < 1:
            raise ValueError("An attack report needs at least one sample per cell.")

    def __eq__(self, other):
        return (
            isinstance(other, AttackReport)
            and self.attack == other.attack
            and self.epsilon == other.epsilon
            and self.n == other.n
            and self.model_id == other.model_id
            and self.objective == other.objective
            and np.array_equal(self.infeasible, other.infeasible)
        )

    @property
    def n_cells(self):
        return len(self.infeasible)

    @property
    def rates(self):
        return self.infeasible / self.n

    @property
    def aggregate_rate(self):
        """Infeasible (cell, sample) pairs over all L * n pairs."""
        return int(self.infeasible.sum()) / (self.n_cells * self.n)

    @property
    def d_eps_cm(self):
        return d_eps_cm(self.epsilon)

    def to_dataframe(self):
        """Rows per cell plus an aggregate row with cell 'all'."""
        rows = [
            [j, self.attack, self.epsilon, self.d_eps_cm, self.n, int(c), c / self.n]
            for j, c in enumerate(self.infeasible)
        ]
        total = int(self.infeasible.sum())
        rows.append(
            [
                "all",
                self.attack,
                self.epsilon,
                self.d_eps_cm,
                self.n_cells * self.n,
                total,
                self.aggregate_rate,
            ]
        )
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)

    def adversarial_frame(self, ids=None):
        """Stored adversarial positions in long form: cell, id, x_0 ... x_{2KL-1}."""
        if self.adversarial is None:
            raise ValueError("This report was built without adversarial examples.")
        ids = np.arange(self.n) if ids is None else np.asarray(ids)
        frames = []
        for j, x_adv in enumerate(self.adversarial):
            df = pd.DataFrame(
                x_adv, columns=[f"x_{i}" for i in range(x_adv.shape[1])]
            )
            df.insert(0, "id", ids)
            df.insert(0, "cell", j)
            frames.append(df)
        return pd.concat(frames, ignore_index=True)


def evaluate_attack(
    models, x, cfg, config, model_id="", keep_examples=True, disable_tqdm=True
):
    """Attack every per-cell model on the test inputs and count infeasible outputs.

    The cell-j attack perturbs all 2KL coordinates against the cell-j model. A sample
    is infeasible for cell j when the model's summed K raw outputs exceed Pmax.

    Arguments:
        models (list): per-cell ModelParams, indexed by cell
        x (ndarray): (N, 2KL) clean test positions
        cfg (AttackConfig): attack settings
        config (NetworkConfig): network constants, source of Pmax
        model_id (str): identifies the attacked models in the report
        keep_examples (bool): keep the adversarial positions in the report
        disable_tqdm (bool): disable the progress bar

    Returns:
        (AttackReport): per-cell counts
    """
    if len(models) != config.n_cells:
        raise ValueError(f"Expected {config.n_cells} per-cell models, got {len(models)}.")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    counts, adversarial = [], []
    for cell, model in enumerate(
        tqdm(models, desc=f"{cfg.kind} eps={cfg.epsilon}", disable=disable_tqdm)
    ):
        x_adv = craft(model, x, cfg, cell=cell)
        counts.append(count_infeasible(model, x_adv, config.p_max))
        if keep_examples:
            adversarial.append(x_adv)
    return AttackReport(
        attack=cfg.kind,
        epsilon=cfg.epsilon,
        n=len(x),
        infeasible=counts,
        model_id=model_id,
        objective=cfg.objective,
        adversarial=adversarial if keep_examples else None,
    )


def recount_infeasible(models, adversarial, p_max):
    """Recount infeasible outputs one stored example at a time.

    Arguments:
        models (list): per-cell ModelParams
        adversarial (list): per-cell (n, 2KL) stored adversarial positions
        p_max (float): per-cell budget in mW

    Returns:
        (ndarray): (L,) infeasible counts
    """
    counts = np.zeros(len(models), dtype=np.int64)
    for cell, (model, x_adv) in enumerate(zip(models, adversarial)):
        for row in x_adv:
            out = forward(model, row)
            if sum(out[: model.n_powers]) > p_max:
                counts[cell] += 1
    return counts


def default_configs(kinds, epsilons, base=None):
    """AttackConfigs of a campaign grid, ordered by kind then epsilon."""
    base = AttackConfig() if base is None else base
    grid = []
    for kind in kinds:
        for eps in epsilons:
            data = base.to_dict()
            data.update(kind=kind, epsilon=eps, beta=None)
            grid.append(AttackConfig.from_dict(data))
    return grid
