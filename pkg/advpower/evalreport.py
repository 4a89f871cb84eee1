# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Spectral efficiency, sum-SE distributions, transferability and report files."""

from dataclasses import asdict, dataclass, fields
import json
import os

import numpy as np
import pandas as pd

from .attacks import (
    AttackReport,
    count_infeasible,
    craft,
    d_eps_cm,
    evaluate_attack,
)
from .defense import rescale_powers
from .neuralnet import predict_powers
from .utils import InvalidConfigError, InvalidDatasetError, check_unknown_keys

TRANSFER_COLUMNS = [
    "surrogate",
    "victim",
    "cell",
    "attack",
    "epsilon",
    "d_eps_cm",
    "n",
    "infeasible",
    "rate",
    "whitebox_rate",
]
CDF_COLUMNS = ["sum_se_bps_hz", "cdf"]
POWER_SOURCES = (
    "truth",
    "clean-dnn",
    "attacked-dnn",
    "attacked+rescale",
    "advtrained+rescale",
)


@dataclass(frozen=True)
class SEConfig:
    """Coherence block length and downlink data samples per block."""

    tau_c: int = 200
    tau_d: int = 185

    def __post_init__(self):
        if not 0 < self.tau_d <= self.tau_c:
            raise InvalidConfigError(
                f"SE config needs 0 < tau_d <= tau_c, got tau_d={self.tau_d}, tau_c={self.tau_c}."
            )

    @classmethod
    def default(cls, config, tau_c=200):
        """tau_d = tau_c - 10 - tau_p with tau_p = K pilots."""
        return cls(tau_c=tau_c, tau_d=tau_c - 10 - config.n_ues)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        check_unknown_keys("se", data, [f.name for f in fields(cls)])
        return cls(**data)


def spectral_efficiency(gamma, se_cfg):
    """Downlink SE in bit/s/Hz.

    Equation:
        .. math::

            SE = \\frac{\\tau_d}{\\tau_c} \\log_2(1 + \\gamma)
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < 0):
        raise ValueError("Value passed to 'gamma' must be nonnegative.")
    return se_cfg.tau_d / se_cfg.tau_c * np.log2(1 + gamma)


def sum_se(gains_a, gains_b, powers, config, se_cfg):
    """Sum SE over all UEs of every sample.

    Arguments:
        gains_a (ndarray): (N, L, K) average channel gains
        gains_b (ndarray): (N, L, K, L, K) interference gains
        powers (ndarray): (N, L, K) powers in mW
        config (NetworkConfig): network constants
        se_cfg (SEConfig): coherence block settings

    Returns:
        (ndarray): (N,) sum SE in bit/s/Hz
    """
    powers = np.asarray(powers, dtype=np.float64)
    interference = np.einsum("nli,nlijk->njk", powers, gains_b) + config.noise_var
    gamma = powers * gains_a / interference
    return spectral_efficiency(gamma, se_cfg).sum(axis=(1, 2))


def empirical_cdf(values):
    """Sorted values with cumulative fractions i/N, one point per sample."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    return pd.DataFrame(
        {
            "sum_se_bps_hz": values,
            "cdf": np.arange(1, len(values) + 1) / len(values),
        },
        columns=CDF_COLUMNS,
    )


def sum_se_cdf(dataset, sources, se_cfg):
    """Empirical sum-SE CDF of every power source on the dataset's gain tables.

    Arguments:
        dataset (PowerDataset): test records with gain tables
        sources (dict): source name -> (N, L, K) powers in mW
        se_cfg (SEConfig): coherence block settings

    Returns:
        (dict): source name -> DataFrame with columns sum_se_bps_hz and cdf
    """
    if not dataset.has_gains:
        raise InvalidDatasetError("Sum-SE evaluation needs per-sample gain tables.")
    return {
        name: empirical_cdf(
            sum_se(dataset.gains_a, dataset.gains_b, powers, dataset.config, se_cfg)
        )
        for name, powers in sources.items()
    }


def _predict_cells(models, x_per_cell):
    return np.stack(
        [predict_powers(model, x) for model, x in zip(models, x_per_cell)], axis=1
    )


def _attacked(models, x, cfg):
    return [craft(model, x, cfg, cell=j) for j, model in enumerate(models)]


def power_sources(dataset, std_models, cfg, adv_models=None):
    """Per-sample powers of the named sources for the SE comparison.

    DNN powers are clamped at 0. Attacked sources use the per-cell attack against the
    model that produces them. Rescaled sources are scaled to the ground-truth per-cell
    sums.

    Arguments:
        dataset (PowerDataset): test records
        std_models (list): per-cell standard-trained models
        cfg (AttackConfig): attack settings
        adv_models (list, optional): per-cell adversarially trained models

    Returns:
        (dict): source name -> (N, L, K) powers in mW
    """
    x = dataset.positions
    L = dataset.config.n_cells
    attacked = _predict_cells(std_models, _attacked(std_models, x, cfg))
    sources = {
        "truth": dataset.powers,
        "clean-dnn": _predict_cells(std_models, [x] * L),
        "attacked-dnn": attacked,
        "attacked+rescale": rescale_powers(attacked, dataset.sum_powers)[0],
    }
    if adv_models is not None:
        adv_attacked = _predict_cells(adv_models, _attacked(adv_models, x, cfg))
        sources["advtrained+rescale"] = rescale_powers(
            adv_attacked, dataset.sum_powers
        )[0]
    return sources


@dataclass
class TransferReport:
    """Black-box success on the victim of examples crafted on the surrogate."""

    surrogate: str
    victim: str
    attack: str
    epsilon: float
    n: int
    infeasible: np.ndarray
    whitebox_infeasible: np.ndarray

    def __post_init__(self):
        self.infeasible = np.asarray(self.infeasible, dtype=np.int64)
        self.whitebox_infeasible = np.asarray(self.whitebox_infeasible, dtype=np.int64)

    def __eq__(self, other):
        return (
            isinstance(other, TransferReport)
            and (self.surrogate, self.victim, self.attack, self.epsilon, self.n)
            == (other.surrogate, other.victim, other.attack, other.epsilon, other.n)
            and np.array_equal(self.infeasible, other.infeasible)
            and np.array_equal(self.whitebox_infeasible, other.whitebox_infeasible)
        )

    @property
    def rates(self):
        return self.infeasible / self.n

    @property
    def aggregate_rate(self):
        return int(self.infeasible.sum()) / (len(self.infeasible) * self.n)

    @property
    def whitebox_aggregate_rate(self):
        return int(self.whitebox_infeasible.sum()) / (
            len(self.whitebox_infeasible) * self.n
        )

    def as_attack_report(self):
        return AttackReport(
            attack=self.attack,
            epsilon=self.epsilon,
            n=self.n,
            infeasible=self.infeasible,
            model_id=self.victim,
        )

    def to_dataframe(self):
        d_eps = d_eps_cm(self.epsilon)
        L = len(self.infeasible)
        rows = [
            [
                self.surrogate,
                self.victim,
                j,
                self.attack,
                self.epsilon,
                d_eps,
                self.n,
                int(self.infeasible[j]),
                self.rates[j],
                self.whitebox_infeasible[j] / self.n,
            ]
            for j in range(L)
        ]
        rows.append(
            [
                self.surrogate,
                self.victim,
                "all",
                self.attack,
                self.epsilon,
                d_eps,
                L * self.n,
                int(self.infeasible.sum()),
                self.aggregate_rate,
                self.whitebox_aggregate_rate,
            ]
        )
        return pd.DataFrame(rows, columns=TRANSFER_COLUMNS)


def transfer_eval(
    surrogates, victims, cfg, x, config, surrogate_id="surrogate", victim_id="victim"
):
    """Craft examples white-box on the surrogates and count infeasible victim outputs.

    Arguments:
        surrogates (list): per-cell surrogate models
        victims (list): per-cell victim models
        cfg (AttackConfig): attack settings
        x (ndarray): (N, 2KL) clean test positions
        config (NetworkConfig): network constants
        surrogate_id (str): surrogate name in the report
        victim_id (str): victim name in the report

    Returns:
        (TransferReport): transfer and matched white-box counts on the victims
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    whitebox = evaluate_attack(
        victims, x, cfg, config, model_id=victim_id, keep_examples=False
    )
    counts = [
        count_infeasible(victim, craft(surrogate, x, cfg, cell=j), config.p_max)
        for j, (surrogate, victim) in enumerate(zip(surrogates, victims))
    ]
    return TransferReport(
        surrogate=surrogate_id,
        victim=victim_id,
        attack=cfg.kind,
        epsilon=cfg.epsilon,
        n=len(x),
        infeasible=counts,
        whitebox_infeasible=whitebox.infeasible,
    )


def read_report(path):
    """Parse an emitted report CSV, keeping 'cell' as text and floats bit-exact."""
    return pd.read_csv(path, dtype={"cell": str}, float_precision="round_trip")


def cdf_filename(source):
    return "cdf_" + source.replace("+", "_plus_") + ".csv"


def emit_report(out_dir, attack_reports=(), transfer_reports=(), cdfs=None, meta=None):
    """Write report tables and CDF point files.

    Arguments:
        out_dir (str): output directory, created when missing
        attack_reports (list): AttackReports, written in the given order
        transfer_reports (list): TransferReports, written in the given order
        cdfs (dict, optional): source name -> CDF DataFrame
        meta (dict, optional): written to report_meta.json

    Returns:
        (list): written paths
    """
    cdfs = cdfs or {}
    if not attack_reports and not transfer_reports and not cdfs:
        raise ValueError("Nothing to emit: no attack, transfer or CDF results given.")
    for name, df in cdfs.items():
        if len(df) == 0:
            raise ValueError(f"CDF of source '{name}' is empty.")

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if attack_reports:
        path = os.path.join(out_dir, "attack_report.csv")
        pd.concat(
            [r.to_dataframe() for r in attack_reports], ignore_index=True
        ).to_csv(path, index=False)
        paths.append(path)
    if transfer_reports:
        path = os.path.join(out_dir, "transfer_report.csv")
        pd.concat(
            [r.to_dataframe() for r in transfer_reports], ignore_index=True
        ).to_csv(path, index=False)
        paths.append(path)
    for name in sorted(cdfs):
        path = os.path.join(out_dir, cdf_filename(name))
        cdfs[name][CDF_COLUMNS].to_csv(path, index=False)
        paths.append(path)
    if meta is not None:
        path = os.path.join(out_dir, "report_meta.json")
        with open(path, "w") as f:
            json.dump(meta, f, indent=1, sort_keys=True)
            f.write("\n")
        paths.append(path)
    return paths
