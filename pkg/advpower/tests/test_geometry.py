# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import math

import numpy as np
import pytest

from advpower import helpers
from advpower.geometry import (
    POSITION_DIGITS,
    NetworkConfig,
    UEDrop,
    bs_positions,
    drop_ues,
    local_coordinates,
    wrapped_distance,
)
from advpower.utils import InvalidConfigError


def test_default_config():
    config = NetworkConfig()

    assert config.input_dim == 40
    assert config.grid_side == 2
    assert config.network_side == 500.0
    assert config.noise_var == pytest.approx(NetworkConfig.dbm_to_mw(-94))


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        NetworkConfig(n_cells=3)
    with pytest.raises(InvalidConfigError):
        NetworkConfig(n_ues=0)
    with pytest.raises(InvalidConfigError):
        NetworkConfig(p_max=-1.0)
    with pytest.raises(InvalidConfigError):
        NetworkConfig(min_bs_distance=200.0)
    with pytest.raises(InvalidConfigError):
        NetworkConfig.from_dict({"n_cell": 4})


def test_config_hash():
    config = NetworkConfig()

    reloaded = NetworkConfig.from_dict(config.to_dict())
    assert config.config_hash() == reloaded.config_hash()
    assert config.config_hash() != NetworkConfig(n_antennas=64).config_hash()


def test_bs_positions(grid_config):
    assert np.array_equal(
        bs_positions(grid_config),
        [[125.0, 125.0], [375.0, 125.0], [125.0, 375.0], [375.0, 375.0]],
    )


def test_wrapped_distance():
    config = NetworkConfig()

    assert wrapped_distance([0.0, 0.0], [499.0, 0.0], config) == pytest.approx(1.0)
    assert wrapped_distance([10.0, 20.0], [10.0, 20.0], config) == 0.0
    assert wrapped_distance([0.0, 0.0], [250.0, 250.0], config) == pytest.approx(
        250 * math.sqrt(2)
    )

    rng = np.random.default_rng(0)
    p, q = rng.uniform(0, 500, size=(2, 100, 2))
    d = wrapped_distance(p, q, config)
    assert np.allclose(d, wrapped_distance(q, p, config))
    assert np.all(d <= 250 * math.sqrt(2) + 1e-9)


def test_wrapped_distance_triangle_inequality():
    config = NetworkConfig()
    rng = np.random.default_rng(1)
    p, q, r = rng.uniform(0, config.network_side, size=(3, 1000, 2))

    direct = wrapped_distance(p, r, config)
    detour = wrapped_distance(p, q, config) + wrapped_distance(q, r, config)
    assert np.all(direct <= detour + 1e-9)


def test_local_coordinates_norm_is_wrapped_distance():
    config = NetworkConfig()
    rng = np.random.default_rng(2)
    bs = bs_positions(config)
    # 50 drops of 20 UEs each give 1,000 UE-BS pairs
    for seed in range(50):
        positions = rng.uniform(0, config.network_side, size=(4, 5, 2))
        drop = UEDrop(positions=positions, seed=seed)
        j = int(rng.integers(config.n_cells))
        local = local_coordinates(drop, j, config)

        assert np.allclose(
            np.linalg.norm(local, axis=-1),
            wrapped_distance(positions, bs[j], config),
            rtol=0,
            atol=1e-9,
        )


def test_local_coordinates(grid_config):
    bs = bs_positions(grid_config)
    at_bs = UEDrop(positions=np.tile(bs[0], (4, 2, 1)), seed=0)
    assert np.array_equal(local_coordinates(at_bs, 0, grid_config), np.zeros((4, 2, 2)))

    positions = np.tile(bs[0], (4, 2, 1))
    positions[1, 0] = [260.0, 0.0]
    drop = UEDrop(positions=positions, seed=0)
    local = local_coordinates(drop, 0, grid_config)
    assert np.linalg.norm(local[1, 0]) == pytest.approx(
        wrapped_distance(bs[0], [260.0, 0.0], grid_config)
    )

    with pytest.raises(ValueError):
        local_coordinates(drop, 4, grid_config)


def test_drop_single_cell():
    config = NetworkConfig(n_cells=1, n_ues=1)
    drop = drop_ues(config, seed=11)

    assert drop.positions.shape == (1, 1, 2)
    assert np.all((drop.positions >= 0) & (drop.positions <= config.cell_side))
    assert np.linalg.norm(drop.positions[0, 0] - 125.0) >= config.min_bs_distance


def test_drop_deterministic(grid_config):
    assert drop_ues(grid_config, 3) == drop_ues(grid_config, 3)
    assert drop_ues(grid_config, 3) != drop_ues(grid_config, 4)


def test_drop_in_home_cell(grid_config):
    bs = bs_positions(grid_config)
    for seed in range(50):
        drop = drop_ues(grid_config, seed)
        offset = drop.positions - bs[:, None, :]
        assert np.all(np.abs(offset) <= grid_config.cell_side / 2)
        assert np.all(np.linalg.norm(offset, axis=-1) >= grid_config.min_bs_distance)
        assert np.array_equal(
            drop.positions, helpers._quantize(drop.positions, POSITION_DIGITS)
        )


def test_drop_flatten_order(grid_config):
    drop = drop_ues(grid_config, 0)
    flat = drop.flatten()

    assert flat.shape == (grid_config.input_dim,)
    assert np.array_equal(flat[:2], drop.positions[0, 0])
    assert np.array_equal(flat[2:4], drop.positions[0, 1])
    assert np.array_equal(flat[4:6], drop.positions[1, 0])


def test_drop_mean_near_cell_centers():
    config = NetworkConfig(n_cells=4, n_ues=5)
    drops = np.stack([drop_ues(config, seed).positions for seed in range(10000)])
    means = drops.mean(axis=(0, 2))

    assert np.allclose(means, bs_positions(config), atol=1.25)
