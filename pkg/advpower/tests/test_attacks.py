# Copyright 2024 advpower Project Developers. See the top-level LICENSE file for details.
#
# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from advpower.attacks import (
    ATTACK_KINDS,
    AttackConfig,
    AttackReport,
    attack_loss,
    check_ball,
    count_infeasible,
    craft,
    d_eps_cm,
    default_configs,
    evaluate_attack,
    fgsm,
    mifgsm,
    pgdm,
    random_perturb,
    recount_infeasible,
    within_budget,
)
from advpower.neuralnet import predict_powers
from advpower.utils import BudgetViolationError, InvalidConfigError
from utils import make_elu_model, make_linear_model


@pytest.fixture
def rising_model():
    """Single-cell linear model, cell power rising 2 mW per meter on every axis."""
    return make_linear_model(np.ones((4, 2)), output_offset=249.9)


@pytest.fixture
def ramp_inputs():
    """Ten inputs whose clean predicted cell power is 499.8 + 0.08 n mW."""
    return np.outer(np.arange(10) * 0.01, np.ones(4))


def test_loss_ignores_sum_head():
    offsets = np.array([100.0, 200.0, 50.0, 50.0, 50.0, 1e6])
    model = make_linear_model(np.zeros((2, 5)), output_offset=offsets)

    assert attack_loss(model, [1.0, 2.0]) == pytest.approx(450.0)
    assert np.allclose(attack_loss(model, np.zeros((3, 2))), 450.0)


def test_loss_is_not_clamped():
    model = make_linear_model(np.zeros((2, 2)), output_offset=-3.0)

    assert attack_loss(model, [0.0, 0.0]) == pytest.approx(-6.0)
    assert np.array_equal(predict_powers(model, [0.0, 0.0]), [0.0, 0.0])


def test_fgsm_follows_gradient_sign(rising_model, ramp_inputs):
    x_adv = fgsm(rising_model, ramp_inputs, 0.1)

    assert np.allclose(x_adv, ramp_inputs + 0.1, rtol=0, atol=1e-15)
    assert np.array_equal(fgsm(rising_model, ramp_inputs, 0.0), ramp_inputs)
    assert np.allclose(
        fgsm(rising_model, ramp_inputs, 0.1, objective="min_power"),
        ramp_inputs - 0.1,
        rtol=0,
        atol=1e-15,
    )


def test_fgsm_zero_gradient_leaves_input():
    model = make_linear_model(np.zeros((3, 2)))
    x = np.array([1.0, 2.0, 3.0])

    assert np.array_equal(fgsm(model, x, 0.2), x)


def test_pgdm_ends_on_ball_boundary(rising_model, ramp_inputs):
    cfg = AttackConfig(kind="pgdm", epsilon=0.1, alpha=0.01, steps=40)
    x_adv = pgdm(rising_model, ramp_inputs, cfg)

    assert np.array_equal(x_adv, ramp_inputs + 0.1)


def test_single_step_pgdm_is_fgsm():
    model = make_elu_model(6, (8, 4), 2, seed=3, output_scale=500.0)
    x = np.random.default_rng(1).normal(scale=50.0, size=(12, 6))
    cfg = AttackConfig(kind="pgdm", epsilon=0.2, alpha=0.2, steps=1)

    assert np.array_equal(pgdm(model, x, cfg), fgsm(model, x, 0.2))


def test_mifgsm_linear_model(rising_model, ramp_inputs):
    cfg = AttackConfig(kind="mifgsm", epsilon=0.1, iterations=10)
    x_adv = mifgsm(rising_model, ramp_inputs, cfg)

    assert cfg.beta == pytest.approx(0.01)
    assert np.allclose(x_adv, ramp_inputs + 0.1, rtol=0, atol=1e-12)


def test_single_iteration_mifgsm_is_fgsm():
    model = make_elu_model(6, (8, 4), 2, seed=3, output_scale=500.0)
    x = np.random.default_rng(2).normal(scale=50.0, size=(12, 6))
    cfg = AttackConfig(kind="mifgsm", epsilon=0.2, decay=0.0, iterations=1, beta=0.2)

    assert np.array_equal(mifgsm(model, x, cfg), fgsm(model, x, 0.2))


def test_mifgsm_rejects_oversized_step(rising_model, ramp_inputs):
    cfg = AttackConfig(kind="mifgsm", epsilon=0.1, iterations=10, beta=0.05)
    with pytest.raises(ValueError, match="beta"):
        mifgsm(rising_model, ramp_inputs, cfg)


def test_random_perturbation():
    x = np.random.default_rng(0).uniform(0, 500, size=(1000, 100))
    x_adv = random_perturb(x, 0.3, seed=4)

    assert np.allclose(np.abs(x_adv - x), 0.3)
    assert np.array_equal(x_adv, random_perturb(x, 0.3, seed=4))
    assert not np.array_equal(x_adv, random_perturb(x, 0.3, seed=5))
    # 1e5 fair signs
    assert np.mean(x_adv > x) == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("epsilon", [0.05, 0.1, 0.2, 0.3])
def test_attacks_stay_in_ball(grid_models, grid_splits, epsilon):
    x = grid_splits[2].positions
    for cfg in default_configs(ATTACK_KINDS, [epsilon]):
        for cell, model in enumerate(grid_models):
            x_adv = craft(model, x, cfg, cell=cell)
            assert x_adv.shape == x.shape
            assert np.max(np.abs(x_adv - x)) <= cfg.epsilon + 1e-12


def test_mifgsm_ball_scan(grid_models):
    x = np.random.default_rng(3).uniform(0, 500, size=(500, grid_models[0].input_dim))
    for epsilon in (0.1, 0.2, 0.3):
        cfg = AttackConfig(kind="mifgsm", epsilon=epsilon)
        for model in grid_models:
            x_adv = mifgsm(model, x, cfg)
            assert np.all(np.abs(x_adv - x) <= epsilon + 1e-12)


def test_fgsm_raises_predicted_power(grid_models):
    x = np.random.default_rng(4).uniform(0, 500, size=(500, grid_models[0].input_dim))
    for model in grid_models:
        clean = attack_loss(model, x)
        attacked = attack_loss(model, fgsm(model, x, 0.1))
        assert np.mean(attacked >= clean) >= 0.9


def test_within_budget_catches_violation():
    @within_budget
    def overshoot(x, epsilon):
        return np.asarray(x) + 2 * epsilon

    with pytest.raises(BudgetViolationError):
        overshoot(np.zeros(3), 0.1)
    with pytest.raises(BudgetViolationError):
        check_ball(np.array([0.3]), np.array([0.0]), 0.2)
    check_ball(np.array([0.2]), np.array([0.0]), 0.2)


def test_attack_config_validation():
    with pytest.raises(InvalidConfigError):
        AttackConfig(epsilon=0.5)
    with pytest.raises(InvalidConfigError):
        AttackConfig(epsilon=-0.1)
    with pytest.raises(InvalidConfigError):
        AttackConfig(kind="cw")
    with pytest.raises(InvalidConfigError):
        AttackConfig(steps=0)
    with pytest.raises(InvalidConfigError):
        AttackConfig(objective="max_rate")
    with pytest.raises(InvalidConfigError):
        AttackConfig.from_dict({"epsilon": 0.1, "restarts": 3})

    assert AttackConfig(epsilon=0.0).beta == 0.0


@pytest.mark.parametrize(
    "epsilon, cm", [(0.05, 7.07), (0.1, 14.14), (0.2, 28.28), (0.3, 42.42)]
)
def test_displacement_in_cm(epsilon, cm):
    assert d_eps_cm(epsilon) == cm
    assert AttackConfig(epsilon=epsilon).d_eps_cm == cm


def test_zero_model_is_never_infeasible(small_config):
    model = make_linear_model(np.zeros((4, 2)))
    x = np.random.default_rng(0).uniform(0, 250, size=(5, 4))
    report = evaluate_attack([model], x, AttackConfig(epsilon=0.3), small_config)

    assert report.aggregate_rate == 0.0
    assert report.n == 5


def test_counts_are_strict():
    at_budget = make_linear_model(np.zeros((1, 2)), output_offset=[250.0, 250.0, 0.0])
    above = make_linear_model(np.zeros((1, 2)), output_offset=[250.0, 250.001, 0.0])

    assert count_infeasible(at_budget, np.zeros((3, 1)), 500.0) == 0
    assert count_infeasible(above, np.zeros((3, 1)), 500.0) == 3


def test_evaluate_attack_counts(small_config, rising_model, ramp_inputs):
    clean = evaluate_attack(
        [rising_model],
        ramp_inputs,
        AttackConfig(kind="fgsm", epsilon=0.0),
        small_config,
    )
    attacked = evaluate_attack(
        [rising_model],
        ramp_inputs,
        AttackConfig(kind="fgsm", epsilon=0.1),
        small_config,
    )

    assert clean.infeasible.tolist() == [7]
    assert attacked.infeasible.tolist() == [10]
    assert attacked.rates.tolist() == [1.0]
    assert np.array_equal(
        recount_infeasible([rising_model], attacked.adversarial, small_config.p_max),
        attacked.infeasible,
    )


def test_recount_matches_batch_count(grid_models, grid_splits, grid_config):
    cfg = AttackConfig(kind="pgdm", epsilon=0.2, steps=5)
    report = evaluate_attack(
        grid_models, grid_splits[2].positions, cfg, grid_config, model_id="m1"
    )

    assert len(report.adversarial) == 4
    assert np.array_equal(
        recount_infeasible(grid_models, report.adversarial, grid_config.p_max),
        report.infeasible,
    )
    frame = report.adversarial_frame()
    assert len(frame) == 4 * report.n
    assert list(frame.columns[:3]) == ["cell", "id", "x_0"]


def test_evaluate_attack_model_count(grid_models, small_config):
    with pytest.raises(ValueError):
        evaluate_attack(grid_models, np.zeros((2, 4)), AttackConfig(), small_config)


def test_report_rows():
    report = AttackReport(attack="fgsm", epsilon=0.1, n=10, infeasible=[1, 0, 3, 2])
    df = report.to_dataframe()

    assert df["cell"].tolist() == [0, 1, 2, 3, "all"]
    assert df["infeasible"].tolist() == [1, 0, 3, 2, 6]
    assert df["n"].tolist() == [10, 10, 10, 10, 40]
    assert df["rate"].iloc[-1] == pytest.approx(0.15)
    assert set(df["d_eps_cm"]) == {14.14}
    with pytest.raises(ValueError):
        report.adversarial_frame()


def test_campaign_grid():
    grid = default_configs(ATTACK_KINDS, [0.1, 0.2])

    assert len(grid) == 8
    assert [(c.kind, c.epsilon) for c in grid[:3]] == [
        ("fgsm", 0.1),
        ("fgsm", 0.2),
        ("pgdm", 0.1),
    ]
    mi = [c for c in grid if c.kind == "mifgsm"]
    assert [c.beta for c in mi] == pytest.approx([0.01, 0.02])
