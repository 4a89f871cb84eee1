# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import os

import numpy as np
import pytest

import advpower.dataset as dataset_module
from advpower import helpers
from advpower.dataset import (
    STD_FLOOR,
    DatasetMeta,
    PowerDataset,
    generate_dataset,
    normalization_stats,
    split,
)
from advpower.geometry import POSITION_DIGITS, NetworkConfig
from advpower.utils import (
    DataGenerationError,
    EmptySplitError,
    InfeasibleInstanceError,
    InvalidDatasetError,
)
from utils import read_bytes


def synthetic_dataset(config, n, seed=0):
    rng = np.random.default_rng(seed)
    shape = (n, config.n_cells, config.n_ues)
    powers = rng.uniform(0, config.p_max / config.n_ues, size=shape)
    positions = rng.uniform(0, config.network_side, size=(n, config.input_dim))
    return PowerDataset(config, np.arange(n), positions, powers)


def test_single_ue_gets_full_budget():
    config = NetworkConfig(n_cells=1, n_ues=1, n_antennas=4, mc_realizations=10)
    ds = generate_dataset(config, 1, "mr", seed=0, disable_tqdm=True)

    assert ds.powers.shape == (1, 1, 1)
    assert ds.powers[0, 0, 0] == pytest.approx(config.p_max, rel=1e-9)
    assert np.array_equal(ds.sum_powers, ds.powers.sum(axis=2))


def test_generation_is_byte_identical(tmpdir, grid_config):
    first = os.path.join(str(tmpdir), "a.csv")
    second = os.path.join(str(tmpdir), "b.csv")
    kwargs = dict(seed=2, max_regen_rate=0.5, disable_tqdm=True)
    generate_dataset(grid_config, 4, "mmse", path=first, **kwargs)
    generate_dataset(grid_config, 4, "mmse", path=second, **kwargs)

    assert read_bytes(first) == read_bytes(second)
    for suffix in (".gains_a.npy", ".gains_b.npy"):
        assert read_bytes(first[:-4] + suffix) == read_bytes(second[:-4] + suffix)


def test_records_are_feasible(grid_dataset):
    config = grid_dataset.config
    assert len(grid_dataset) == 40
    assert np.all(grid_dataset.powers >= 0)
    assert np.all(grid_dataset.sum_powers <= config.p_max)
    assert grid_dataset.has_gains
    assert grid_dataset.gain_table(0).a.shape == (config.n_cells, config.n_ues)


def test_csv_round_trip(tmpdir, grid_dataset):
    path = os.path.join(str(tmpdir), "dataset.csv")
    grid_dataset.to_csv(path)
    loaded = PowerDataset.from_csv(path)

    assert loaded == grid_dataset
    assert loaded.dataset_hash() == grid_dataset.dataset_hash()
    assert np.array_equal(loaded.gains_a, grid_dataset.gains_a)
    assert np.array_equal(loaded.gains_b, grid_dataset.gains_b)
    assert not PowerDataset.from_csv(path, load_gains=False).has_gains

    with open(path) as f:
        header = f.readline()
    assert header.startswith("# advpower-dataset version=1")
    assert "precoder=mr" in header


def test_csv_quantizes_positions(tmpdir, grid_config):
    ds = synthetic_dataset(grid_config, 5)
    path = os.path.join(str(tmpdir), "synthetic.csv")
    ds.to_csv(path)
    loaded = PowerDataset.from_csv(path)

    quantized = helpers._quantize(ds.positions, POSITION_DIGITS)
    assert np.array_equal(loaded.positions, quantized)
    assert np.array_equal(loaded.powers, ds.powers)

    with open(path) as f:
        records = [line for line in f.read().splitlines() if not line.startswith("#")]
    L, K = grid_config.n_cells, grid_config.n_ues
    assert [r.split(",")[0] for r in records] == ["0", "1", "2", "3", "4"]
    n_cols = 1 + grid_config.input_dim + L * K + L
    assert {len(r.split(",")) for r in records} == {n_cols}


def test_reload_rejects_budget_violation(tmpdir, grid_config):
    ds = synthetic_dataset(grid_config, 3)
    ds.powers[1, 2, 0] = 2 * grid_config.p_max
    ds.sum_powers = ds.powers.sum(axis=2)
    path = os.path.join(str(tmpdir), "bad.csv")
    ds.to_csv(path)

    with pytest.raises(InvalidDatasetError, match="Record 1"):
        PowerDataset.from_csv(path)


def test_reload_rejects_wrong_sums(tmpdir, grid_config):
    path = os.path.join(str(tmpdir), "bad.csv")
    synthetic_dataset(grid_config, 3).to_csv(path)
    with open(path) as f:
        lines = f.read().splitlines()
    fields = lines[-1].split(",")
    fields[-1] = repr(float(fields[-1]) / 2)
    lines[-1] = ",".join(fields)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")

    with pytest.raises(InvalidDatasetError, match="sums"):
        PowerDataset.from_csv(path)


def test_reload_rejects_foreign_file(tmpdir):
    path = os.path.join(str(tmpdir), "other.csv")
    with open(path, "w") as f:
        f.write("a,b\n1,2\n")

    with pytest.raises(InvalidDatasetError):
        PowerDataset.from_csv(path)


def test_split_sizes(grid_config):
    ds = synthetic_dataset(grid_config, 1000)
    train, val, test = split(ds, (0.8, 0.1, 0.1), seed=0)

    assert (len(train), len(val), len(test)) == (800, 100, 100)
    ids = np.concatenate([train.ids, val.ids, test.ids])
    assert sorted(ids.tolist()) == list(range(1000))
    assert np.all(np.diff(train.ids) > 0)

    again = split(ds, (0.8, 0.1, 0.1), seed=0)
    other = split(ds, (0.8, 0.1, 0.1), seed=1)
    assert np.array_equal(again[0].ids, train.ids)
    assert not np.array_equal(other[0].ids, train.ids)


def test_split_edge_cases(grid_config):
    ds = synthetic_dataset(grid_config, 5)
    train, val, test = split(ds, (1.0, 0.0, 0.0))
    assert (len(train), len(val), len(test)) == (5, 0, 0)

    with pytest.raises(EmptySplitError):
        split(ds, (0.9, 0.05, 0.05))
    with pytest.raises(ValueError):
        split(ds, (0.5, 0.2, 0.2))


def test_normalization_stats(grid_config):
    ds = synthetic_dataset(grid_config, 20)
    ds.positions[:, 3] = 42.0
    stats = normalization_stats(ds)

    assert stats.std[3] == STD_FLOOR
    assert stats.mean[3] == 42.0
    assert stats.power_scale == grid_config.p_max
    assert np.allclose(stats.mean, ds.positions.mean(axis=0))


def test_cell_targets(grid_dataset):
    targets = grid_dataset.cell_targets(2)

    assert targets.shape == (40, grid_dataset.config.n_ues + 1)
    assert np.array_equal(targets[:, :-1], grid_dataset.powers[:, 2])
    assert np.array_equal(targets[:, -1], grid_dataset.sum_powers[:, 2])


def test_select_ids(grid_dataset):
    part = grid_dataset.select_ids([5, 1])
    assert part.ids.tolist() == [5, 1]
    assert np.array_equal(part.powers[0], grid_dataset.powers[5])

    with pytest.raises(InvalidDatasetError):
        grid_dataset.select_ids([1000])


def test_meta_round_trip(tmpdir, grid_splits):
    train, val, test, stats = grid_splits
    meta = DatasetMeta(
        config_hash=train.config.config_hash(),
        dataset_hash="abc",
        precoder="mr",
        seed=7,
        train_ids=train.ids.tolist(),
        val_ids=val.ids.tolist(),
        test_ids=test.ids.tolist(),
        stats=stats,
    )
    path = os.path.join(str(tmpdir), "meta.json")
    meta.to_json(path)
    loaded = DatasetMeta.from_json(path)

    assert loaded == meta
    assert loaded.stats.stats_hash() == stats.stats_hash()
    assert (loaded.n_train, loaded.n_val, loaded.n_test) == (24, 8, 8)


def test_failed_samples_are_regenerated(monkeypatch, small_config):
    calls = []
    real_solve = dataset_module.maxprod_solve

    def flaky_solve(gains, config, **kwargs):
        calls.append(1)
        if len(calls) == 1:
            raise InfeasibleInstanceError("first draw rejected")
        return real_solve(gains, config, **kwargs)

    monkeypatch.setattr(dataset_module, "maxprod_solve", flaky_solve)
    with pytest.warns(RuntimeWarning, match="Sample 0 regenerated"):
        ds = generate_dataset(
            small_config, 2, "mr", seed=0, max_regen_rate=1.0, disable_tqdm=True
        )
    assert len(ds) == 2
    assert len(calls) >= 3


def test_regeneration_rate_aborts(monkeypatch, small_config):
    def failing_solve(gains, config, **kwargs):
        raise InfeasibleInstanceError("rejected")

    monkeypatch.setattr(dataset_module, "maxprod_solve", failing_solve)
    with pytest.warns(RuntimeWarning):
        with pytest.raises(DataGenerationError):
            generate_dataset(small_config, 10, "mr", seed=0, disable_tqdm=True)
