# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

"""Full-size runs with the default configuration, enabled with --desk-scale."""

import numpy as np
import pytest

from advpower.attacks import ATTACK_KINDS, count_infeasible, evaluate_attack
from advpower.dataset import generate_dataset, normalization_stats, split
from advpower.defense import adversarial_train, generate_adv_dataset
from advpower.evalreport import power_sources, sum_se_cdf, transfer_eval
from advpower.neuralnet import predict_powers, train_cells
from advpower.runconfig import RunConfig

pytestmark = pytest.mark.desk_scale

EPSILONS = (0.05, 0.1, 0.2, 0.3)


def cell_pairs(dataset, n_cells):
    return [(dataset.positions, dataset.cell_targets(j)) for j in range(n_cells)]


@pytest.fixture(scope="module")
def desk():
    run = RunConfig()
    config = run.network
    L = config.n_cells
    dataset = generate_dataset(
        config,
        run.dataset.n,
        "mr",
        run.sub_seed("dataset"),
        max_regen_rate=run.dataset.max_regen_rate,
        disable_tqdm=True,
    )
    train, val, test = split(dataset, run.dataset.fractions, run.sub_seed("split"))
    stats = normalization_stats(train)
    tc = run.train_config()

    standard, adversarial, histories = {}, {}, {}
    pgdm = run.attack_config("pgdm", run.defense.epsilon)
    for arch in ("M1", "M2"):
        standard[arch], histories[arch] = train_cells(
            arch, config, stats, cell_pairs(train, L), cell_pairs(val, L), tc
        )
        adv = generate_adv_dataset(standard[arch], train, pgdm)
        adv_val = generate_adv_dataset(standard[arch], val, pgdm)
        adversarial[arch], _ = adversarial_train(
            adv, adv_val, arch, config, stats, tc
        )

    def rate(models, kind, eps):
        cfg = run.attack_config(kind, eps)
        return evaluate_attack(
            models, test.positions, cfg, config, keep_examples=False
        ).aggregate_rate

    return {
        "run": run,
        "test": test,
        "standard": standard,
        "adversarial": adversarial,
        "histories": histories,
        "rate": rate,
    }


@pytest.mark.parametrize("arch", ["M1", "M2"])
def test_clean_inputs_are_feasible(desk, arch):
    test = desk["test"]
    p_max = desk["run"].network.p_max
    models = desk["standard"][arch]
    counts = [count_infeasible(m, test.positions, p_max) for m in models]

    assert sum(counts) / (len(counts) * len(test)) <= 0.02


def test_prediction_error(desk):
    test = desk["test"]
    models = desk["standard"]["M1"]
    pred = np.stack([predict_powers(m, test.positions) for m in models], axis=1)
    error = np.abs(pred.sum(axis=2) - test.sum_powers) / test.sum_powers

    assert np.mean(error) < 0.15


def test_early_stopping_triggers(desk):
    max_epochs = desk["run"].train.max_epochs
    for histories in desk["histories"].values():
        assert all(len(h) < max_epochs for h in histories)


def test_attack_ordering(desk):
    models = desk["standard"]["M2"]
    rates = {kind: desk["rate"](models, kind, 0.2) for kind in ATTACK_KINDS}

    assert rates["pgdm"] >= rates["mifgsm"] >= rates["fgsm"] > rates["random"]
    assert rates["pgdm"] - rates["random"] >= 0.2


@pytest.mark.parametrize("arch", ["M1", "M2"])
@pytest.mark.parametrize("kind", ATTACK_KINDS)
def test_rates_grow_with_budget(desk, arch, kind):
    rates = [desk["rate"](desk["standard"][arch], kind, eps) for eps in EPSILONS]

    assert all(b >= a - 0.03 for a, b in zip(rates, rates[1:]))


@pytest.mark.parametrize("eps", EPSILONS)
def test_larger_model_is_more_vulnerable(desk, eps):
    m1 = desk["rate"](desk["standard"]["M1"], "pgdm", eps)
    m2 = desk["rate"](desk["standard"]["M2"], "pgdm", eps)

    assert m2 >= m1 - 0.03


def test_pgdm_examples_mostly_infeasible(desk):
    assert desk["rate"](desk["standard"]["M1"], "pgdm", 0.2) >= 0.3


@pytest.mark.parametrize("arch", ["M1", "M2"])
def test_adversarial_training(desk, arch):
    before = desk["rate"](desk["standard"][arch], "pgdm", 0.2)
    after = desk["rate"](desk["adversarial"][arch], "pgdm", 0.2)

    assert after <= 0.5 * before
    assert desk["rate"](desk["adversarial"][arch], "random", 0.2) <= 0.01


@pytest.mark.parametrize("surrogate, victim", [("M2", "M1"), ("M1", "M2")])
@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
def test_transfer_is_weaker_than_whitebox(desk, surrogate, victim, eps):
    run = desk["run"]
    report = transfer_eval(
        desk["standard"][surrogate],
        desk["standard"][victim],
        run.attack_config("pgdm", eps),
        desk["test"].positions,
        run.network,
    )

    assert report.aggregate_rate <= report.whitebox_aggregate_rate


def test_sum_se_medians(desk):
    run = desk["run"]
    test = desk["test"]
    cfg = run.attack_config("pgdm", run.se.epsilon, objective=run.se.objective)
    sources = power_sources(
        test, desk["standard"]["M1"], cfg, adv_models=desk["adversarial"]["M1"]
    )
    cdfs = sum_se_cdf(test, sources, run.se_config())
    median = {name: np.median(df["sum_se_bps_hz"]) for name, df in cdfs.items()}

    assert median["truth"] >= median["attacked-dnn"]
    assert median["attacked-dnn"] <= median["advtrained+rescale"] <= median["truth"]
