# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Cell layout, UE placement and wrap-around distances on a square grid of cells."""

from dataclasses import asdict, dataclass, fields
import math

import numpy as np

from . import helpers
from .utils import InvalidConfigError, check_positive, check_unknown_keys

# Drops are quantized so the text dataset format reproduces them bit-exactly.
POSITION_DIGITS = 9


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and system constants of the multicell network.

    Attributes:
        n_cells (int): L, number of cells, a perfect square
        n_ues (int): K, UEs per cell
        n_antennas (int): M, antennas per BS
        p_max (float): per-cell downlink power budget (mW)
        noise_var (float): noise power (mW), -94 dBm by default
        cell_side (float): side of a square cell (m)
        min_bs_distance (float): exclusion radius around each BS (m)
        pathloss_ref_db (float): pathloss at the reference distance (dB)
        pathloss_exponent (float): pathloss exponent
        pathloss_ref_distance (float): reference distance (m)
        pilot_power (float): uplink pilot power (mW)
        mc_realizations (int): Monte-Carlo realizations per gain table
        bandwidth (float): system bandwidth (Hz), metadata only
    """

    n_cells: int = 4
    n_ues: int = 5
    n_antennas: int = 32
    p_max: float = 500.0
    noise_var: float = 10 ** (-94 / 10)
    cell_side: float = 250.0
    min_bs_distance: float = 35.0
    pathloss_ref_db: float = 148.1
    pathloss_exponent: float = 3.76
    pathloss_ref_distance: float = 1000.0
    pilot_power: float = 100.0
    mc_realizations: int = 100
    bandwidth: float = 20e6

    def __post_init__(self):
        for name in ("n_cells", "n_ues", "n_antennas", "mc_realizations"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidConfigError(
                    f"Value passed to '{name}' must be a positive integer, got {value}."
                )
        g = math.isqrt(int(self.n_cells))
        if g * g != self.n_cells:
            raise InvalidConfigError(
                f"Value passed to 'n_cells' must be a perfect square, got {self.n_cells}."
            )
        for name in (
            "p_max",
            "noise_var",
            "cell_side",
            "pathloss_exponent",
            "pathloss_ref_distance",
            "pilot_power",
            "bandwidth",
        ):
            check_positive(name, getattr(self, name))
        if not 0 < self.min_bs_distance < self.cell_side / 2:
            raise InvalidConfigError(
                "Value passed to 'min_bs_distance' must lie in (0, cell_side/2), "
                f"got {self.min_bs_distance}."
            )

    @staticmethod
    def dbm_to_mw(dbm):
        return 10 ** (dbm / 10)

    @property
    def grid_side(self):
        return math.isqrt(int(self.n_cells))

    @property
    def network_side(self):
        return self.grid_side * self.cell_side

    @property
    def input_dim(self):
        """Length of the flattened position vector, 2KL."""
        return 2 * self.n_ues * self.n_cells

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        check_unknown_keys("network", data, [f.name for f in fields(cls)])
        return cls(**data)

    def config_hash(self):
        return helpers._hash_dict(self.to_dict())


@dataclass
class UEDrop:
    """UE positions (m, global frame) indexed [cell l][ue k], plus the seed that drew them."""

    positions: np.ndarray
    seed: int

    def flatten(self):
        """Positions as the 2KL network input, [cell 0 ue 0 x, y, cell 0 ue 1 x, y, ...]."""
        return self.positions.reshape(-1).copy()

    def __eq__(self, other):
        return (
            isinstance(other, UEDrop)
            and self.seed == other.seed
            and np.array_equal(self.positions, other.positions)
        )


def bs_positions(config):
    """BS coordinates at the cell centers, cells numbered row-major from the lower-left.

    Arguments:
        config (NetworkConfig): network constants

    Returns:
        (ndarray): (L, 2) coordinates in meters
    """
    g = config.grid_side
    idx = np.arange(config.n_cells)
    cols = idx % g
    rows = idx // g
    return np.stack(
        [(cols + 0.5) * config.cell_side, (rows + 0.5) * config.cell_side], axis=1
    )


def minimal_image(delta, config):
    """Map displacement vectors to their minimal image on the network torus."""
    side = config.network_side
    return np.mod(np.asarray(delta, dtype=np.float64) + side / 2, side) - side / 2


def wrapped_distance(p, q, config):
    """Minimal-image distance between points on the g*cell_side torus.

    Arguments:
        p (array-like): (..., 2) points in meters
        q (array-like): (..., 2) points in meters, broadcast against p
        config (NetworkConfig): network constants

    Returns:
        (float or ndarray): distances in meters
    """
    delta = minimal_image(np.asarray(q, dtype=np.float64) - p, config)
    return np.linalg.norm(delta, axis=-1)


def local_coordinates(drop, bs_index, config):
    """Positions of all UEs in the frame of one BS, using the minimal wrap-around image.

    Arguments:
        drop (UEDrop): UE positions
        bs_index (int): index of the BS whose frame is used
        config (NetworkConfig): network constants

    Returns:
        (ndarray): (L, K, 2) displacement vectors from the BS in meters
    """
    if not 0 <= bs_index < config.n_cells:
        raise ValueError(
            f"Value passed to 'bs_index' must be in [0, {config.n_cells}), got {bs_index}."
        )
    bs = bs_positions(config)[bs_index]
    return minimal_image(drop.positions - bs, config)


def drop_ues(config, seed):
    """Drop K UEs uniformly in every cell, outside the exclusion disc of the home BS.

    Candidates are drawn in the home square and rejected inside the disc. Positions
    are quantized to POSITION_DIGITS significant digits before the distance check.

    Arguments:
        config (NetworkConfig): network constants
        seed (int): seed of the drop

    Returns:
        (UEDrop): positions of shape (L, K, 2)
    """
    rng = np.random.default_rng(seed)
    centers = bs_positions(config)
    K = config.n_ues
    positions = np.empty((config.n_cells, K, 2))
    for cell, center in enumerate(centers):
        lower = center - config.cell_side / 2
        accepted = 0
        while accepted < K:
            cand = lower + rng.uniform(0.0, config.cell_side, size=(K, 2))
            cand = helpers._quantize(cand, POSITION_DIGITS)
            keep = np.linalg.norm(cand - center, axis=1) >= config.min_bs_distance
            take = cand[keep][: K - accepted]
            positions[cell, accepted : accepted + len(take)] = take
            accepted += len(take)
    return UEDrop(positions=positions, seed=int(seed))
