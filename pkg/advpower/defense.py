# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Defenses: rescaling predicted powers and adversarial training on PGDM examples."""

import os
import warnings

import numpy as np
from tqdm import tqdm

from .attacks import pgdm
from .attacks.attack_utils import check_ball
from .dataset import PowerDataset
from .neuralnet import train_cells
from .utils import InvalidDatasetError


def rescale_powers(pred, truth_sum):
    """Scale predicted powers so they sum to the ground-truth cell power.

    Negative predictions are clamped to 0 first. A prediction summing to 0 falls back
    to the equal split truth_sum / K and is flagged.

    Equation:
        .. math::

            \\hat{\\rho}^R_{jk} = \\hat{\\rho}_{jk} \\frac{\\sum_k \\rho_{jk}}{\\sum_k \\hat{\\rho}_{jk}}

    Arguments:
        pred (ndarray): (..., K) predicted powers in mW
        truth_sum (float or ndarray): (...) ground-truth cell powers in mW

    Returns:
        (tuple): rescaled powers with the shape of pred, and a boolean array marking
            the degenerate predictions
    """
    pred = np.maximum(np.asarray(pred, dtype=np.float64), 0.0)
    truth_sum = np.asarray(truth_sum, dtype=np.float64)
    total = pred.sum(axis=-1)
    degenerate = total <= 0
    scale = truth_sum / np.where(degenerate, 1.0, total)
    rescaled = np.where(
        degenerate[..., None],
        (truth_sum / pred.shape[-1])[..., None],
        pred * scale[..., None],
    )
    if np.any(degenerate):
        warnings.warn(
            f"{int(np.sum(degenerate))} all-zero prediction(s) replaced by an equal split.",
            RuntimeWarning,
        )
    return rescaled, degenerate


class AdvDataset:
    """Per-cell adversarial positions paired with the clean optimal powers.

    Arguments:
        clean (PowerDataset): clean records, source of ids and targets
        positions (ndarray): (L, N, 2KL) adversarial positions per cell
        provenance (dict): source model hashes and PGDM settings
    """

    def __init__(self, clean, positions, provenance):
        self.clean = clean
        self.positions = np.asarray(positions, dtype=np.float64)
        self.provenance = dict(provenance)
        expected = (clean.config.n_cells, len(clean), clean.config.input_dim)
        if self.positions.shape != expected:
            raise ValueError(
                f"Adversarial positions have shape {self.positions.shape}, expected {expected}."
            )

    def __len__(self):
        return len(self.clean)

    @property
    def epsilon(self):
        return float(self.provenance["epsilon"])

    def cell_provenance(self, cell):
        data = {k: v for k, v in self.provenance.items() if k != "source_models"}
        data.update(cell=cell, source_model=self.provenance["source_models"][cell])
        return data

    def cell_dataset(self, cell):
        return self.clean.with_positions(
            self.positions[cell], provenance=self.cell_provenance(cell)
        )

    def cell_xy(self, cell):
        """Training pair of one cell: adversarial positions and clean targets."""
        return self.positions[cell], self.clean.cell_targets(cell)

    def check_budget(self):
        for cell in range(len(self.positions)):
            check_ball(self.positions[cell], self.clean.positions, self.epsilon)

    def to_csv(self, directory, prefix="adv"):
        """Write one dataset-format file per cell; returns the paths."""
        paths = []
        for cell in range(len(self.positions)):
            path = os.path.join(directory, f"{prefix}_cell{cell}.csv")
            self.cell_dataset(cell).to_csv(path, write_gains=False)
            paths.append(path)
        return paths

    @staticmethod
    def from_csv(clean, paths):
        """Rebuild from per-cell files written by to_csv and the clean dataset."""
        positions, provenance = [], None
        sources = []
        for cell, path in enumerate(paths):
            ds = PowerDataset.from_csv(path, load_gains=False)
            if not np.array_equal(ds.ids, clean.ids) or not np.array_equal(
                ds.powers, clean.powers
            ):
                raise InvalidDatasetError(
                    f"{path} does not carry the clean records' ids and targets."
                )
            positions.append(ds.positions)
            sources.append(ds.provenance["source_model"])
            provenance = {
                k: v
                for k, v in ds.provenance.items()
                if k not in ("cell", "source_model")
            }
        provenance["source_models"] = sources
        return AdvDataset(clean, np.stack(positions), provenance)


def generate_adv_dataset(models, dataset, cfg, disable_tqdm=True):
    """One PGDM example per record and cell against the standard-trained models.

    The dataset is generated once; targets stay the clean optimal powers.

    Arguments:
        models (list): per-cell standard-trained ModelParams
        dataset (PowerDataset): clean split to perturb
        cfg (AttackConfig): PGDM settings
        disable_tqdm (bool): disable the progress bar

    Returns:
        (AdvDataset): adversarial records with provenance
    """
    if cfg.kind != "pgdm":
        raise ValueError(
            f"Adversarial datasets are generated with PGDM, got kind '{cfg.kind}'."
        )
    positions = [
        pgdm(model, dataset.positions, cfg)
        for model in tqdm(models, desc="adv dataset", disable=disable_tqdm)
    ]
    provenance = {
        "attack": cfg.kind,
        "epsilon": cfg.epsilon,
        "alpha": cfg.alpha,
        "steps": cfg.steps,
        "objective": cfg.objective,
        "source_models": [model.model_hash() for model in models],
    }
    return AdvDataset(dataset, np.stack(positions), provenance)


def adversarial_train(
    adv, adv_val, arch, config, stats, tc, hidden=None, disable_tqdm=True
):
    """Train per-cell models on adversarial positions with clean targets.

    Early stopping uses the adversarial validation set. Initialization and shuffling
    follow the same seeds as standard training, and the input affine is the clean
    train statistics, so epsilon = 0 reproduces standard training exactly.

    Arguments:
        adv (AdvDataset): adversarial training records
        adv_val (AdvDataset): adversarial validation records, disjoint from adv
        arch (str): "M1" or "M2"
        config (NetworkConfig): network constants
        stats (NormalizationStats): clean train-split statistics
        tc (TrainConfig): optimizer settings
        hidden (tuple, optional): replace the hidden widths
        disable_tqdm (bool): disable the progress bars

    Returns:
        (tuple): per-cell models and history DataFrames
    """
    shared = set(adv.clean.ids.tolist()) & set(adv_val.clean.ids.tolist())
    if shared:
        raise InvalidDatasetError(
            f"Adversarial train and validation sets share {len(shared)} record(s)."
        )
    L = config.n_cells
    return train_cells(
        arch,
        config,
        stats,
        [adv.cell_xy(j) for j in range(L)],
        [adv_val.cell_xy(j) for j in range(L)],
        tc,
        hidden=hidden,
        disable_tqdm=disable_tqdm,
    )
