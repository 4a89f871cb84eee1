# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

# make flake8 unused names in this file.
# flake8: noqa: F401

from . import (
    attacks as attacks,
    external as external,
)

from .geometry import NetworkConfig, UEDrop, drop_ues
from .channel import GainTable, estimate_gains, sinr
from .powopt import PowerAllocation, maxprod_solve
from .dataset import DatasetMeta, NormalizationStats, PowerDataset, generate_dataset
from .neuralnet import ModelParams, TrainConfig, build_arch, train_cells
from .attacks import AttackConfig, AttackReport, evaluate_attack
from .defense import AdvDataset, adversarial_train, rescale_powers
from .evalreport import SEConfig, TransferReport, emit_report, transfer_eval
from .runconfig import RunConfig
from .version import __version__
