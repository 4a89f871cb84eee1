# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import pytest

from advpower.dataset import generate_dataset, normalization_stats, split
from advpower.geometry import NetworkConfig
from advpower.neuralnet import TrainConfig, train_cells
from utils import GRID_NETWORK, SMALL_NETWORK, write_run_config


def pytest_addoption(parser):
    parser.addoption(
        "--desk-scale",
        action="store_true",
        default=False,
        help="run the desk-scale acceptance tests (slow)",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "desk_scale: full-size acceptance run, needs --desk-scale"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--desk-scale"):
        return
    skip = pytest.mark.skip(reason="needs --desk-scale to run")
    for item in items:
        if "desk_scale" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def small_config():
    """Single cell with two UEs and four antennas."""
    return NetworkConfig(**SMALL_NETWORK)


@pytest.fixture
def grid_config():
    """2x2 grid of cells with two UEs each."""
    return NetworkConfig(**GRID_NETWORK)


@pytest.fixture(scope="session")
def grid_dataset():
    """40 labeled snapshots of the 2x2 grid, with gain tables."""
    return generate_dataset(
        NetworkConfig(**GRID_NETWORK),
        40,
        "mr",
        seed=7,
        max_regen_rate=0.25,
        disable_tqdm=True,
    )


@pytest.fixture(scope="session")
def grid_splits(grid_dataset):
    """Train, validation and test splits of grid_dataset and the train statistics.

    Returns:
        tuple: train, val and test PowerDatasets and their NormalizationStats
    """
    train, val, test = split(grid_dataset, (0.6, 0.2, 0.2), seed=1)
    return train, val, test, normalization_stats(train)


@pytest.fixture(scope="session")
def quick_train_config():
    return TrainConfig(
        learning_rate=1e-2, batch_size=8, max_epochs=15, patience=5, seed=3
    )


@pytest.fixture(scope="session")
def grid_models(grid_splits, quick_train_config):
    """Per-cell reduced-width models trained briefly on the grid splits."""
    train, val, _, stats = grid_splits
    L = train.config.n_cells
    models, _ = train_cells(
        "M1",
        train.config,
        stats,
        [(train.positions, train.cell_targets(j)) for j in range(L)],
        [(val.positions, val.cell_targets(j)) for j in range(L)],
        quick_train_config,
        hidden=(16, 8),
    )
    return models


@pytest.fixture
def run_config_file(tmpdir):
    return write_run_config(tmpdir)
