"""Optimizer behavior, early stopping, determinism, and the equivalence of
the joint independence fit with separate marginal fits."""
import json

import numpy as np
import pytest

from copsurv.copulas import CopulaSpec, Family, spec_from_tau
from copsurv.data import SurvivalDataset
from copsurv.datagen import generate_synthetic, preset_linear_risk
from copsurv.errors import NumericalFailure, ValidationError
from copsurv.training import (
    Adam,
    FittedJointModel,
    TrainConfig,
    _optimize,
    fit,
    fit_marginal,
    tau_hat,
)


def make_data(n=400, tau=0.5, family="clayton", seed=0):
    cfg = preset_linear_risk(seed, n=n, copula=spec_from_tau(family, tau))
    dataset, _, _ = generate_synthetic(cfg)
    return dataset


# ---------------------------------------------------------------------------
# Config


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(alpha=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValidationError):
        TrainConfig(patience=0)
    with pytest.raises(ValidationError):
        TrainConfig(max_epochs=10, patience=11)
    with pytest.raises(ValidationError):
        TrainConfig(validation_fraction=1.0)
    with pytest.raises(ValidationError):
        TrainConfig.from_dict({"alpha": 0.001, "bogus": 1})


def test_train_config_roundtrip():
    cfg = TrainConfig(alpha=0.002, max_epochs=50, patience=10, seed=3, l2_lambda=0.01)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


# ---------------------------------------------------------------------------
# Adam


def test_adam_first_step_size():
    # with bias correction the first step is alpha * g / (|g| + eps'), i.e.
    # just under alpha in magnitude, in the ascent direction
    p = np.array(1.0)
    opt = Adam({"p": p}, alpha=0.001)
    opt.step({"p": np.array(5.0)})
    delta = float(p) - 1.0
    assert 0.0009 < delta <= 0.001 * (1.0 + 1e-6)

    q = np.array(1.0)
    opt2 = Adam({"q": q}, alpha=0.001)
    opt2.step({"q": np.array(-0.3)})
    assert -0.001 * (1.0 + 1e-6) <= float(q) - 1.0 < -0.0009


def test_adam_multiple_steps_bounded():
    p = np.array(0.0)
    opt = Adam({"p": p}, alpha=0.01)
    rng = np.random.default_rng(0)
    prev = 0.0
    for _ in range(50):
        opt.step({"p": np.array(rng.uniform(0.5, 2.0))})
        # consistent-sign gradients move the parameter monotonically,
        # about alpha per step
        assert float(p) > prev
        assert float(p) - prev <= 0.011
        prev = float(p)


# ---------------------------------------------------------------------------
# Shared loop mechanics


def test_optimize_failure_carries_epoch_and_state():
    p = np.array(0.0)
    calls = {"n": 0}

    def loss_and_grad():
        calls["n"] += 1
        if calls["n"] > 3:
            raise NumericalFailure("boom", record_index=7)
        return 0.0, {"p": np.array(1.0)}

    cfg = TrainConfig(max_epochs=10, patience=10, validation_fraction=0.0)
    with pytest.raises(NumericalFailure) as info:
        _optimize({"p": p}, [], loss_and_grad, None, cfg)
    assert info.value.epoch == 3
    assert info.value.record_index == 7
    assert "p" in info.value.last_state


def test_optimize_early_stop_and_restore():
    # validation loss rises after epoch 4; training must stop after
    # `patience` non-improving epochs and restore the best parameters
    p = np.array(0.0)
    epoch_box = {"e": 0}

    def loss_and_grad():
        return 0.0, {"p": np.array(1.0)}

    def val():
        epoch_box["e"] += 1
        e = epoch_box["e"]
        return abs(e - 5)  # best at the 5th evaluated epoch

    cfg = TrainConfig(max_epochs=100, patience=6, validation_fraction=0.0)
    trace, best_epoch, best_val = _optimize({"p": p}, [], loss_and_grad, val, cfg)
    assert best_epoch == 4
    assert best_val == 0.0
    assert len(trace.epoch) == 4 + 6 + 1
    # restored parameter value is the one entering epoch 5's evaluation
    assert float(p) == pytest.approx(trace_epoch_param(trace, best_epoch), abs=1e-12)


def trace_epoch_param(trace, epoch):
    # reconstruct the Adam trajectory of a unit-gradient scalar
    opt = Adam({"p": np.array(0.0)}, alpha=0.001)
    for _ in range(epoch + 1):
        opt.step({"p": np.array(1.0)})
    return float(opt.params["p"])


# ---------------------------------------------------------------------------
# Joint fitting


def test_fit_requires_both_statuses():
    ds = make_data(100)
    all_events = SurvivalDataset(ds.x, ds.t_obs, np.ones(len(ds), dtype=int))
    with pytest.raises(ValidationError):
        fit(all_events, "linear", "linear", "clayton", TrainConfig(max_epochs=5, patience=5))
    # marginal fitting accepts degenerate indicators
    model, trace = fit_marginal(all_events, "linear", TrainConfig(max_epochs=5, patience=5))
    assert model.nu > 0


def test_fit_smoke_and_trace_columns():
    ds = make_data(300, tau=0.5)
    cfg = TrainConfig(max_epochs=30, patience=30, seed=0)
    out = fit(ds, "linear", "linear", "clayton", cfg)
    assert isinstance(out, FittedJointModel)
    assert out.copula.family is Family.CLAYTON
    assert set(out.trace.copula_path) == {"theta_hat"}
    assert len(out.trace.epoch) == 30
    # theta respects the positivity floor everywhere on the path
    assert np.all(out.trace.copula_path["theta_hat"] >= 1e-3)

    mix = fit(ds, "linear", "linear", "mixture", cfg)
    assert set(mix.trace.copula_path) == {"theta_frank", "theta_clayton", "kappa"}
    assert np.all(mix.trace.copula_path["kappa"] >= 0.0)
    assert np.all(mix.trace.copula_path["kappa"] <= 1.0)

    ind = fit(ds, "linear", "linear", "independence", cfg)
    assert ind.trace.copula_path == {}
    assert tau_hat(ind.copula) == 0.0


def test_theta_floor_reached_from_independent_data():
    ds = make_data(300, tau=0.0)
    cfg = TrainConfig(max_epochs=1500, patience=1500, seed=1)
    out = fit(ds, "linear", "linear", "clayton", cfg)
    path = out.trace.copula_path["theta_hat"]
    assert path.min() >= 1e-3
    assert path[-1] == pytest.approx(1e-3, abs=1e-9)


def test_fit_deterministic():
    ds = make_data(250, tau=0.4)
    cfg = TrainConfig(max_epochs=40, patience=40, seed=5)
    a = fit(ds, "linear", "mlp", "frank", cfg)
    b = fit(ds, "linear", "mlp", "frank", cfg)
    assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)
    assert np.array_equal(a.trace.train_negloglik, b.trace.train_negloglik)
    assert np.array_equal(a.trace.val_negloglik, b.trace.val_negloglik)


def test_joint_independence_fit_equals_marginal_fit():
    # with the independence family the likelihood separates, so the event
    # block of the joint fit must follow the same trajectory as a marginal
    # fit of the event model alone (no validation split, no early stop)
    ds = make_data(200, tau=0.3)
    cfg = TrainConfig(max_epochs=400, patience=400, validation_fraction=0.0, seed=2)
    joint = fit(ds, "linear", "linear", "independence", cfg)
    marginal, _ = fit_marginal(ds, "linear", cfg)
    assert float(joint.event_model.log_nu) == pytest.approx(float(marginal.log_nu), abs=1e-6)
    assert float(joint.event_model.log_rho) == pytest.approx(float(marginal.log_rho), abs=1e-6)
    assert np.allclose(joint.event_model.risk.weights, marginal.risk.weights, atol=1e-6)

    # the censor block likewise matches a marginal fit with flipped status
    flipped = SurvivalDataset(ds.x, ds.t_obs, 1 - ds.delta)
    censor_marginal, _ = fit_marginal(flipped, "linear", cfg)
    assert float(joint.censor_model.log_nu) == pytest.approx(
        float(censor_marginal.log_nu), abs=1e-6
    )
    assert np.allclose(joint.censor_model.risk.weights, censor_marginal.risk.weights, atol=1e-6)


def test_fit_recovers_dependence_direction():
    # short run: theta need not converge, but the validation loss must
    # improve and theta must have moved up from its floor trajectory
    ds = make_data(800, tau=0.6, seed=3)
    cfg = TrainConfig(max_epochs=2500, patience=2500, seed=3)
    out = fit(ds, "linear", "linear", "clayton", cfg)
    assert out.trace.val_negloglik[out.best_epoch] < out.trace.val_negloglik[0]
    assert out.copula.theta > 1.2  # moving from init 1.0 toward 3.0


def test_best_epoch_is_argmin_of_validation():
    ds = make_data(300, tau=0.4)
    cfg = TrainConfig(max_epochs=200, patience=50, seed=0)
    out = fit(ds, "linear", "linear", "clayton", cfg)
    vals = out.trace.val_negloglik
    assert out.best_epoch == int(np.argmin(vals))
    assert out.best_val_negloglik == pytest.approx(float(vals.min()), abs=0.0)


def test_checkpoint_roundtrip(tmp_path):
    ds = make_data(150, tau=0.4)
    out = fit(ds, "linear", "linear", "clayton", TrainConfig(max_epochs=10, patience=10))
    path = tmp_path / "checkpoint.json"
    out.save(path)
    back = FittedJointModel.load(path)
    assert back.copula == out.copula
    assert float(back.event_model.log_nu) == float(out.event_model.log_nu)
    x = ds.x[:5]
    t = ds.t_obs[:5]
    assert np.array_equal(back.censor_model.survival(t, x), out.censor_model.survival(t, x))


def test_trace_csv_format(tmp_path):
    ds = make_data(120, tau=0.4)
    out = fit(ds, "linear", "linear", "clayton", TrainConfig(max_epochs=8, patience=8))
    path = tmp_path / "trace.csv"
    out.trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_negloglik,val_negloglik,theta_hat"
    assert len(lines) == 9

    ind = fit(ds, "linear", "linear", "independence", TrainConfig(max_epochs=8, patience=8))
    ind_path = tmp_path / "ind.csv"
    ind.trace.to_csv(ind_path)
    assert ind_path.read_text().splitlines()[0] == "epoch,train_negloglik,val_negloglik"
