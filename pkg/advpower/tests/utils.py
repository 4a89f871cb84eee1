# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import json
import os

import numpy as np

from advpower.channel import GainTable
from advpower.neuralnet import LayerSpec, build_model

# Reduced networks keep the default suite fast.
SMALL_NETWORK = dict(n_cells=1, n_ues=2, n_antennas=4, mc_realizations=10)
GRID_NETWORK = dict(n_cells=4, n_ues=2, n_antennas=8, mc_realizations=10)


def make_gains(a, b):
    """GainTable from explicit average and interference gains."""
    return GainTable(
        a=np.asarray(a, dtype=np.float64),
        b=np.asarray(b, dtype=np.float64),
        precoder="mr",
        n_realizations=1,
        seed=0,
    )


def make_linear_model(
    w, bias=None, input_std=None, output_scale=1.0, output_offset=0.0
):
    """Model with one linear K-wide layer of (d, K) weights w and the sum head."""
    w = np.asarray(w, dtype=np.float64)
    d, K = w.shape
    model = build_model(
        d,
        [LayerSpec(K, "linear"), LayerSpec(K + 1, "linear", trainable=False)],
        seed=0,
        input_std=input_std,
        output_scale=output_scale,
        output_offset=output_offset,
    )
    model.weights[0] = w.copy()
    model.biases[0] = np.zeros(K) if bias is None else np.asarray(bias, np.float64)
    return model


def make_elu_model(input_dim, hidden, n_ues, seed=0, output_scale=1.0):
    """Randomly initialized model with elu hidden layers and the sum head."""
    layers = (
        [LayerSpec(w, "elu") for w in hidden]
        + [LayerSpec(n_ues, "elu")]
        + [LayerSpec(n_ues + 1, "linear", trainable=False)]
    )
    return build_model(input_dim, layers, seed, output_scale=output_scale)


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def write_run_config(directory, **sections):
    """Write a small pipeline config into directory and return its path."""
    data = {
        "seed": 5,
        "network": dict(GRID_NETWORK),
        "dataset": {"n_train": 24, "n_val": 8, "n_test": 8, "max_regen_rate": 0.25},
        "train": {"max_epochs": 3, "batch_size": 8, "patience": 3},
        "attack": {"epsilons": [0.1, 0.2], "steps": 5, "iterations": 5},
        "defense": {"epsilon": 0.1},
        "se": {"epsilon": 0.1},
        "paths": {"out": os.path.join(str(directory), "runs")},
    }
    data.update(sections)
    path = os.path.join(str(directory), "run.json")
    with open(path, "w") as f:
        json.dump(data, f)
    return path
