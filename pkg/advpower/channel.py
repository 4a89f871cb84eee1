# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Channel statistics, pilot-contaminated estimation, precoding and Monte-Carlo gains.

Array conventions: realizations are indexed (r, bs l, cell j, ue k, antenna m), so
channels[r, l, j, k] is the channel between BS l and UE k of cell j. Precoders are
indexed (r, bs l, ue i, antenna m) and only exist for UEs of the BS's own cell.
"""

from dataclasses import dataclass

import numpy as np

from . import helpers
from .geometry import bs_positions, wrapped_distance
from .utils import DegenerateDrawError

PRECODERS = ("mr", "mmse")


@dataclass
class ChannelStats:
    """Large-scale gains beta[bs l][cell j][ue k] and the spatial correlation model.

    Only the uncorrelated model, R = beta * I, is implemented.
    """

    beta: np.ndarray
    corr_model: str = "uncorrelated"

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.corr_model != "uncorrelated":
            raise ValueError(
                f"Value passed to 'corr_model' must be 'uncorrelated', got '{self.corr_model}'."
            )
        if np.any(self.beta < 0) or not np.all(np.isfinite(self.beta)):
            raise ValueError("Large-scale gains must be finite and nonnegative.")


@dataclass
class GainTable:
    """Average channel gains a[j][k] and interference gains b[l][i][j][k] of one snapshot.

    b[l, i, j, k] is the average power leaked onto UE k of cell j by the precoder of UE i
    in cell l; the entry with (l, i) == (j, k) holds the variance of the UE's own
    effective channel.
    """

    a: np.ndarray
    b: np.ndarray
    precoder: str
    n_realizations: int
    seed: int

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        L, K = self.a.shape
        if self.b.shape != (L, K, L, K):
            raise ValueError(
                f"Interference gains have shape {self.b.shape}, expected {(L, K, L, K)}."
            )
        for name, arr in (("a", self.a), ("b", self.b)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"Gain table entries '{name}' must be finite and >= 0.")

    def __eq__(self, other):
        return (
            isinstance(other, GainTable)
            and self.precoder == other.precoder
            and self.n_realizations == other.n_realizations
            and self.seed == other.seed
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )


def pathloss(d, config):
    """Linear large-scale gain at distance d.

    Equation:
        .. math::

            \\beta(d) = 10^{(-PL_0 - 10 \\alpha \\log_{10}(d / d_0)) / 10}

    Arguments:
        d (float or ndarray): distance(s) in meters, at least min_bs_distance
        config (NetworkConfig): network constants

    Returns:
        (float or ndarray): linear gain(s)
    """
    d = np.asarray(d, dtype=np.float64)
    # rounding slack for distances recomputed through the wrap-around
    if np.any(d < config.min_bs_distance * (1 - 1e-12)):
        raise ValueError(
            f"Distances below min_bs_distance={config.min_bs_distance} m are not allowed."
        )
    loss_db = config.pathloss_ref_db + 10 * config.pathloss_exponent * np.log10(
        d / config.pathloss_ref_distance
    )
    return 10 ** (-loss_db / 10)


def channel_stats(drop, config):
    """Large-scale gains of every BS-UE pair from wrapped distances."""
    bs = bs_positions(config)
    d = wrapped_distance(drop.positions[None, :, :, :], bs[:, None, None, :], config)
    return ChannelStats(beta=pathloss(d, config))


def _complex_normal(rng, shape):
    draw = rng.standard_normal((2,) + tuple(shape))
    return (draw[0] + 1j * draw[1]) / np.sqrt(2)


def realize_channels(stats, config, seed, n_realizations=None):
    """Draw uncorrelated Rayleigh channels h ~ CN(0, beta I_M).

    Realization r uses its own stream keyed by (seed, "realization", r), so the draw
    of a realization does not depend on how many others are drawn.

    Arguments:
        stats (ChannelStats): large-scale gains, shape (L, L, K)
        config (NetworkConfig): network constants
        seed (int): seed of the realizations
        n_realizations (int, optional): count, defaults to config.mc_realizations

    Returns:
        (ndarray): complex array of shape (R, L, L, K, M)
    """
    R = config.mc_realizations if n_realizations is None else int(n_realizations)
    shape = stats.beta.shape + (config.n_antennas,)
    scale = np.sqrt(stats.beta)[..., None]
    channels = np.empty((R,) + shape, dtype=np.complex128)
    for r in range(R):
        rng = np.random.default_rng(helpers._derive_seed(seed, "realization", r))
        channels[r] = scale * _complex_normal(rng, shape)
    return channels


def mmse_estimate(channels, stats, config, seed):
    """MMSE channel estimates from pilots reused across cells (pilot k in every cell).

    Each BS observes the sum of the channels of all UEs sharing a pilot plus noise of
    variance noise_var / (tau_p * pilot_power), and scales that observation per UE.

    Arguments:
        channels (ndarray): (R, L, L, K, M) channel realizations
        stats (ChannelStats): large-scale gains
        config (NetworkConfig): network constants
        seed (int): seed of the pilot noise

    Returns:
        (ndarray): estimates with the shape of channels
    """
    if not config.pilot_power > 0:
        raise ValueError("Value passed to 'pilot_power' must be positive.")
    R, L_bs, _, K, M = channels.shape
    noise_scale = config.noise_var / (K * config.pilot_power)
    observed = channels.sum(axis=2)
    for r in range(R):
        rng = np.random.default_rng(helpers._derive_seed(seed, "pilot", r))
        observed[r] += np.sqrt(noise_scale) * _complex_normal(rng, (L_bs, K, M))
    gain = stats.beta / (stats.beta.sum(axis=1, keepdims=True) + noise_scale)
    return gain[None, :, :, :, None] * observed[:, :, None, :, :]


def precode(estimates, kind, config):
    """Unit-norm MR or M-MMSE precoders built from same-BS estimates.

    Arguments:
        estimates (ndarray): (R, L, L, K, M) channel estimates
        kind (str): "mr" or "mmse"
        config (NetworkConfig): network constants

    Returns:
        (ndarray): (R, L, K, M) precoders, w[r, l, i] for UE i of cell l
    """
    if kind not in PRECODERS:
        raise ValueError(f"Value passed to 'kind' must be one of {PRECODERS}.")
    L = estimates.shape[1]
    cells = np.arange(L)
    own = estimates[:, cells, cells]
    if kind == "mr":
        v = own
    else:
        # (H H^H + xi I)^-1 H = H (H^H H + xi I)^-1, solved in the LK-dim space
        R, L_bs, _, K, _ = estimates.shape
        H = estimates.reshape(R, L_bs, L * K, -1)
        small = np.einsum("rlam,rlbm->rlab", H.conj(), H)
        scale = np.real(np.trace(small, axis1=-2, axis2=-1)) / (L * K)
        scale = np.where(scale > 0, scale, 1.0)[..., None, None]
        xi = config.noise_var * config.n_ues / config.p_max
        small = small / scale + (xi / scale) * np.eye(L * K)
        rhs = np.zeros((L_bs, L * K, K))
        for l in range(L_bs):
            rhs[l, l * K + np.arange(K), np.arange(K)] = 1.0
        rhs = np.broadcast_to(rhs, (R,) + rhs.shape)
        y = np.linalg.solve(small, rhs)
        v = np.einsum("rlam,rlai->rlim", H, y)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise DegenerateDrawError("Channel estimate with zero norm, cannot precode.")
    return v / norms


def gains_from_realizations(channels, precoders):
    """Monte-Carlo estimates of the average channel and interference gains.

    Arguments:
        channels (ndarray): (R, L, L, K, M) true channels
        precoders (ndarray): (R, L, K, M) precoders

    Returns:
        (tuple): a of shape (L, K) and b of shape (L, K, L, K)
    """
    inner = np.einsum("rlim,rljkm->rlijk", precoders.conj(), channels)
    L, K = inner.shape[1:3]
    jj, kk = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")

    own = inner[:, jj, kk, jj, kk]
    own_mean = own.mean(axis=0)
    a = np.abs(own_mean) ** 2

    b = np.mean(np.abs(inner) ** 2, axis=0)
    b[jj, kk, jj, kk] = np.mean(np.abs(own - own_mean) ** 2, axis=0)
    return a, b


def estimate_gains(drop, kind, config, seed):
    """Gain table of one UE drop and precoder, estimated over config.mc_realizations.

    Arguments:
        drop (UEDrop): UE positions
        kind (str): "mr" or "mmse"
        config (NetworkConfig): network constants
        seed (int): seed of channels and pilot noise

    Returns:
        (GainTable): estimated gains
    """
    if config.mc_realizations < 2:
        raise ValueError("Value passed to 'mc_realizations' must be at least 2.")
    stats = channel_stats(drop, config)
    channels = realize_channels(stats, config, helpers._derive_seed(seed, "channels"))
    estimates = mmse_estimate(
        channels, stats, config, helpers._derive_seed(seed, "pilots")
    )
    a, b = gains_from_realizations(channels, precode(estimates, kind, config))
    return GainTable(
        a=a, b=b, precoder=kind, n_realizations=config.mc_realizations, seed=int(seed)
    )


def sinr(gains, powers, config):
    """Downlink SINR of every UE.

    Equation:
        .. math::

            \\gamma_{jk} = \\frac{\\rho_{jk} a_{jk}}{\\sum_{l,i} \\rho_{li} b_{lijk} + \\sigma^2}

    Arguments:
        gains (GainTable): gain table of the snapshot
        powers (ndarray): (L, K) powers in mW
        config (NetworkConfig): network constants

    Returns:
        (ndarray): (L, K) SINRs
    """
    powers = np.asarray(powers, dtype=np.float64)
    interference = np.einsum("li,lijk->jk", powers, gains.b) + config.noise_var
    return powers * gains.a / interference
