# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Supervised dataset mapping UE positions to per-cell max-product powers.

File format, one comma-separated record per line after the header block::

    # advpower-dataset version=1 config=<hash> L=4 K=5 M=32 Pmax=500 precoder=mr digits=9
    # config {...}
    # provenance {...}                      (adversarial datasets only)
    id,x_0,...,x_{2KL-1},rho_00,...,rho_{L-1,K-1},sum_0,...,sum_{L-1}

Positions are written with `digits` significant digits, powers and sums with 17, so
a reload reproduces the arrays bit-exactly.
"""

from dataclasses import dataclass, field
import json
import os
import warnings

import numpy as np
import pandas as pd
from tqdm import tqdm

from . import helpers
from .channel import GainTable, estimate_gains
from .geometry import POSITION_DIGITS, NetworkConfig, drop_ues
from .powopt import maxprod_solve
from .utils import (
    DataGenerationError,
    DegenerateDrawError,
    EmptySplitError,
    InfeasibleInstanceError,
    InvalidDatasetError,
    validate_power_records,
    verify_array_shape,
)

FORMAT_NAME = "advpower-dataset"
FORMAT_VERSION = 1
POWER_DIGITS = 17
STD_FLOOR = 1e-6


@dataclass
class Sample:
    """One network snapshot with its optimal powers."""

    id: int
    positions: np.ndarray
    powers: np.ndarray
    sum_powers: np.ndarray
    gains: GainTable = None


@dataclass
class NormalizationStats:
    """Per-coordinate position mean and std (m) of the train split and the power scale (mW)."""

    mean: np.ndarray
    std: np.ndarray
    power_scale: float

    def to_dict(self):
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "power_scale": float(self.power_scale),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
            power_scale=float(data["power_scale"]),
        )

    def stats_hash(self):
        return helpers._hash_arrays(self.mean, self.std, [self.power_scale])

    def __eq__(self, other):
        return (
            isinstance(other, NormalizationStats)
            and self.power_scale == other.power_scale
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
        )


@dataclass
class DatasetMeta:
    """Sidecar metadata of a generated dataset and its split."""

    config_hash: str
    dataset_hash: str
    precoder: str
    seed: int
    train_ids: list = field(default_factory=list)
    val_ids: list = field(default_factory=list)
    test_ids: list = field(default_factory=list)
    stats: NormalizationStats = None

    @property
    def n_train(self):
        return len(self.train_ids)

    @property
    def n_val(self):
        return len(self.val_ids)

    @property
    def n_test(self):
        return len(self.test_ids)

    def to_json(self, path):
        data = {
            "config_hash": self.config_hash,
            "dataset_hash": self.dataset_hash,
            "precoder": self.precoder,
            "seed": int(self.seed),
            "sizes": {"train": self.n_train, "val": self.n_val, "test": self.n_test},
            "train_ids": [int(i) for i in self.train_ids],
            "val_ids": [int(i) for i in self.val_ids],
            "test_ids": [int(i) for i in self.test_ids],
            "stats": None if self.stats is None else self.stats.to_dict(),
        }
        with open(path, "w") as f:
            json.dump(data, f, indent=1, sort_keys=True)
            f.write("\n")

    @staticmethod
    def from_json(path):
        with open(path) as f:
            data = json.load(f)
        stats = data.get("stats")
        return DatasetMeta(
            config_hash=data["config_hash"],
            dataset_hash=data["dataset_hash"],
            precoder=data["precoder"],
            seed=data["seed"],
            train_ids=list(data["train_ids"]),
            val_ids=list(data["val_ids"]),
            test_ids=list(data["test_ids"]),
            stats=None if stats is None else NormalizationStats.from_dict(stats),
        )


class PowerDataset:
    """Positions, optimal powers and optional gain tables of N snapshots.

    Arguments:
        config (NetworkConfig): network constants the data was generated with
        ids (array-like): (N,) sample ids
        positions (array-like): (N, 2KL) flattened UE positions in meters
        powers (array-like): (N, L, K) optimal powers in mW
        precoder (str): precoder of the gain tables the labels were solved on
        gains_a (array-like, optional): (N, L, K) average channel gains
        gains_b (array-like, optional): (N, L, K, L, K) interference gains
        provenance (dict, optional): origin of adversarial positions
        position_digits (int): significant digits of positions on disk
    """

    def __init__(
        self,
        config,
        ids,
        positions,
        powers,
        precoder="mr",
        gains_a=None,
        gains_b=None,
        provenance=None,
        position_digits=POSITION_DIGITS,
    ):
        L, K = config.n_cells, config.n_ues
        self.config = config
        self.ids = np.asarray(ids, dtype=np.int64)
        n = len(self.ids)
        self.positions = np.asarray(positions, dtype=np.float64).reshape(
            n, config.input_dim
        )
        self.powers = np.asarray(powers, dtype=np.float64).reshape(n, L, K)
        self.sum_powers = self.powers.sum(axis=2)
        self.precoder = precoder
        self.gains_a = None if gains_a is None else np.asarray(gains_a, np.float64)
        self.gains_b = None if gains_b is None else np.asarray(gains_b, np.float64)
        if self.gains_a is not None:
            verify_array_shape("gains_a", self.gains_a, (n, L, K))
            verify_array_shape("gains_b", self.gains_b, (n, L, K, L, K))
        self.provenance = dict(provenance or {})
        self.position_digits = int(position_digits)

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        return (
            isinstance(other, PowerDataset)
            and self.config == other.config
            and self.precoder == other.precoder
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.powers, other.powers)
            and np.array_equal(self.sum_powers, other.sum_powers)
        )

    @property
    def has_gains(self):
        return self.gains_a is not None

    def subset(self, indices):
        """Dataset of the records at the given row indices, in that order."""
        indices = np.asarray(indices, dtype=np.int64)
        return PowerDataset(
            self.config,
            self.ids[indices],
            self.positions[indices],
            self.powers[indices],
            precoder=self.precoder,
            gains_a=None if self.gains_a is None else self.gains_a[indices],
            gains_b=None if self.gains_b is None else self.gains_b[indices],
            provenance=self.provenance,
            position_digits=self.position_digits,
        )

    def select_ids(self, ids):
        """Dataset of the records with the given sample ids."""
        lookup = {int(i): n for n, i in enumerate(self.ids)}
        try:
            return self.subset([lookup[int(i)] for i in ids])
        except KeyError as e:
            raise InvalidDatasetError(f"Sample id {e.args[0]} is not in the dataset.")

    def with_positions(self, positions, provenance=None, position_digits=17):
        """Copy with replaced positions and the same labels, e.g. adversarial inputs."""
        return PowerDataset(
            self.config,
            self.ids,
            positions,
            self.powers,
            precoder=self.precoder,
            gains_a=self.gains_a,
            gains_b=self.gains_b,
            provenance=provenance,
            position_digits=position_digits,
        )

    def cell_targets(self, cell):
        """(N, K+1) training targets of one cell: K powers and their sum, in mW."""
        return np.concatenate(
            [self.powers[:, cell, :], self.sum_powers[:, cell, None]], axis=1
        )

    def gain_table(self, n):
        if not self.has_gains:
            raise InvalidDatasetError("Dataset was loaded without gain tables.")
        return GainTable(
            a=self.gains_a[n],
            b=self.gains_b[n],
            precoder=self.precoder,
            n_realizations=self.config.mc_realizations,
            seed=int(self.ids[n]),
        )

    def sample(self, n):
        return Sample(
            id=int(self.ids[n]),
            positions=self.positions[n].copy(),
            powers=self.powers[n].copy(),
            sum_powers=self.sum_powers[n].copy(),
            gains=self.gain_table(n) if self.has_gains else None,
        )

    def dataframe(self):
        """Records as a DataFrame indexed by sample id."""
        L, K = self.config.n_cells, self.config.n_ues
        columns = (
            [f"x_{i}" for i in range(self.config.input_dim)]
            + [f"rho_{j}_{k}" for j in range(L) for k in range(K)]
            + [f"sum_{j}" for j in range(L)]
        )
        values = np.concatenate(
            [self.positions, self.powers.reshape(len(self), -1), self.sum_powers],
            axis=1,
        )
        return pd.DataFrame(
            values, index=pd.Index(self.ids, name="id"), columns=columns
        )

    def dataset_hash(self):
        return helpers._hash_arrays(self.ids, self.positions, self.powers)

    def header_lines(self):
        c = self.config
        lines = [
            f"# {FORMAT_NAME} version={FORMAT_VERSION} config={c.config_hash()} "
            f"L={c.n_cells} K={c.n_ues} M={c.n_antennas} Pmax={c.p_max:.17g} "
            f"precoder={self.precoder} digits={self.position_digits}",
            "# config " + json.dumps(c.to_dict(), sort_keys=True),
        ]
        if self.provenance:
            lines.append("# provenance " + json.dumps(self.provenance, sort_keys=True))
        return lines

    def to_csv(self, path, write_gains=True):
        """Write the dataset file, plus gain-table sidecars when gains are present."""
        frame = self.dataframe()
        # positions carry position_digits significant digits on disk
        frame.iloc[:, : self.config.input_dim] = helpers._quantize(
            self.positions, self.position_digits
        )
        with open(path, "w") as f:
            f.write("\n".join(self.header_lines()) + "\n")
            frame.to_csv(f, header=False, float_format=f"%.{POWER_DIGITS}g")
        if write_gains and self.has_gains:
            stem = os.path.splitext(str(path))[0]
            np.save(stem + ".gains_a.npy", self.gains_a)
            np.save(stem + ".gains_b.npy", self.gains_b)

    @staticmethod
    def from_csv(path, load_gains=True):
        """Read a dataset file written by to_csv.

        Arguments:
            path (str): dataset file
            load_gains (bool): also load gain-table sidecars when they exist

        Returns:
            (PowerDataset): the dataset
        """
        header = _read_header(path)
        config = NetworkConfig.from_dict(header["config"])
        if config.config_hash() != header["fields"].get("config"):
            raise InvalidDatasetError(
                f"Config hash in the header of {path} does not match its config block."
            )
        L, K = config.n_cells, config.n_ues
        n_cols = 1 + config.input_dim + L * K + L
        try:
            df = pd.read_csv(
                path, comment="#", header=None, float_precision="round_trip"
            )
        except pd.errors.EmptyDataError:
            raise InvalidDatasetError(f"Dataset file {path} has no records.")
        if df.shape[1] != n_cols:
            raise InvalidDatasetError(
                f"Dataset file {path} has {df.shape[1]} columns, expected {n_cols}."
            )
        values = df.iloc[:, 1:].to_numpy(dtype=np.float64)
        positions = values[:, : config.input_dim]
        powers = values[:, config.input_dim : config.input_dim + L * K]
        sums = values[:, config.input_dim + L * K :]
        powers = powers.reshape(-1, L, K)
        validate_power_records(powers, sums, config.p_max)

        gains_a = gains_b = None
        stem = os.path.splitext(str(path))[0]
        if load_gains and os.path.exists(stem + ".gains_a.npy"):
            gains_a = np.load(stem + ".gains_a.npy")
            gains_b = np.load(stem + ".gains_b.npy")
        return PowerDataset(
            config,
            df.iloc[:, 0].to_numpy(dtype=np.int64),
            positions,
            powers,
            precoder=header["fields"]["precoder"],
            gains_a=gains_a,
            gains_b=gains_b,
            provenance=header.get("provenance"),
            position_digits=int(header["fields"]["digits"]),
        )


def _read_header(path):
    """Parse the '#' header block of a dataset file."""
    header = {"fields": {}}
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body.startswith(FORMAT_NAME):
                for token in body.split()[1:]:
                    key, _, value = token.partition("=")
                    header["fields"][key] = value
            elif body.startswith("config "):
                header["config"] = json.loads(body[len("config ") :])
            elif body.startswith("provenance "):
                header["provenance"] = json.loads(body[len("provenance ") :])
    if "config" not in header or "precoder" not in header["fields"]:
        raise InvalidDatasetError(f"{path} is not an {FORMAT_NAME} file.")
    if int(header["fields"].get("version", -1)) != FORMAT_VERSION:
        raise InvalidDatasetError(
            f"Unsupported dataset format version in {path}: {header['fields'].get('version')}"
        )
    return header


def generate_dataset(
    config,
    n,
    kind,
    seed,
    path=None,
    keep_gains=True,
    max_regen_rate=0.01,
    disable_tqdm=False,
    **solver_kwargs,
):
    """Generate n labeled snapshots: drop UEs, estimate gains, solve max-product powers.

    Sample id n is drawn from sub-seed (seed, "sample", n, attempt). When the solver
    fails or a draw is degenerate the sample is redrawn with the next attempt index and
    a RuntimeWarning is emitted.

    Arguments:
        config (NetworkConfig): network constants
        n (int): number of samples
        kind (str): precoder, "mr" or "mmse"
        seed (int): root seed of the dataset
        path (str, optional): write the dataset file here
        keep_gains (bool): keep per-sample gain tables in the returned dataset
        max_regen_rate (float): abort when more than this fraction is regenerated
        disable_tqdm (bool): disable the progress bar
        solver_kwargs: passed to maxprod_solve

    Returns:
        (PowerDataset): the generated dataset
    """
    if n < 1:
        raise ValueError(f"Value passed to 'n' must be at least 1, got {n}.")
    L, K = config.n_cells, config.n_ues
    positions = np.empty((n, config.input_dim))
    powers = np.empty((n, L, K))
    gains_a = np.empty((n, L, K))
    gains_b = np.empty((n, L, K, L, K))
    regenerated = 0

    for sample_id in tqdm(range(n), desc="generate", disable=disable_tqdm):
        attempt = 0
        while True:
            sub = helpers._derive_seed(seed, "sample", sample_id, attempt)
            try:
                drop = drop_ues(config, helpers._derive_seed(sub, "drop"))
                gains = estimate_gains(
                    drop, kind, config, helpers._derive_seed(sub, "gains")
                )
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    alloc = maxprod_solve(gains, config, **solver_kwargs)
                if alloc.converged:
                    break
                reason = f"solver did not converge in {alloc.iterations} iterations"
            except (InfeasibleInstanceError, DegenerateDrawError) as e:
                reason = str(e)
            attempt += 1
            regenerated += 1
            warnings.warn(
                f"Sample {sample_id} regenerated (attempt {attempt}): {reason}",
                RuntimeWarning,
            )
            if regenerated > max_regen_rate * n:
                raise DataGenerationError(
                    f"{regenerated} of {n} samples needed regeneration, above the "
                    f"allowed rate of {max_regen_rate:.2%}."
                )
        positions[sample_id] = drop.flatten()
        powers[sample_id] = alloc.rho
        gains_a[sample_id] = gains.a
        gains_b[sample_id] = gains.b

    dataset = PowerDataset(
        config,
        np.arange(n),
        positions,
        powers,
        precoder=kind,
        gains_a=gains_a if keep_gains else None,
        gains_b=gains_b if keep_gains else None,
    )
    if path is not None:
        dataset.to_csv(path)
    return dataset


def split(dataset, fractions=(0.8, 0.1, 0.1), seed=0):
    """Disjoint, exhaustive shuffle-split into train, validation and test datasets.

    Sizes are round(f_train * n) and round(f_val * n), the test split takes the rest.
    Records keep their original order within each split.

    Arguments:
        dataset (PowerDataset): dataset to split
        fractions (tuple): train, validation and test fractions summing to 1
        seed (int): seed of the shuffle

    Returns:
        (tuple): train, validation and test PowerDatasets
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (3,) or np.any(fractions < 0):
        raise ValueError("Value passed to 'fractions' must be three nonnegative numbers.")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise ValueError(
            f"Value passed to 'fractions' must sum to 1, got {fractions.sum()}."
        )
    n = len(dataset)
    n_train = int(round(fractions[0] * n))
    n_val = min(int(round(fractions[1] * n)), n - n_train)
    n_test = n - n_train - n_val
    for name, frac, size in zip(
        ("train", "val", "test"), fractions, (n_train, n_val, n_test)
    ):
        if (frac > 0 or name == "train") and size == 0:
            raise EmptySplitError(
                f"The {name} split of {n} records with fraction {frac} is empty."
            )

    perm = np.random.default_rng(helpers._derive_seed(seed, "split")).permutation(n)
    parts = np.split(perm, [n_train, n_train + n_val])
    return tuple(dataset.subset(np.sort(part)) for part in parts)


def normalization_stats(train):
    """Position mean and floored std of the train split; power scale Pmax.

    Arguments:
        train (PowerDataset): train split

    Returns:
        (NormalizationStats): statistics, never refit on other splits
    """
    if len(train) == 0:
        raise EmptySplitError("Normalization statistics need a nonempty train split.")
    return NormalizationStats(
        mean=train.positions.mean(axis=0),
        std=np.maximum(train.positions.std(axis=0), STD_FLOOR),
        power_scale=float(train.config.p_max),
    )
