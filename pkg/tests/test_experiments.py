"""Experiment configs, arm orchestration, and output files."""
import csv
import json
from pathlib import Path

import numpy as np
import pytest

from copsurv import experiments as exp
from copsurv.errors import NumericalFailure, ValidationError
from copsurv.experiments import ExperimentConfig, run_experiment
from copsurv.training import TrainConfig

FAST = {"max_epochs": 40, "patience": 40, "seed": 0}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_validation():
    bad = [
        {"kind": "ablation"},
        {"tau_grid": ()},
        {"tau_grid": (0.2, 1.0)},
        {"seeds": ()},
        {"n_val": 0},
        {"kind": "synthetic_sweep", "family": "mixture"},
        {"kind": "metric_bias", "family": "mixture"},
        {"family": "independence"},
        {"kind": "synthetic_sweep", "preset": "metric_bias"},
        {"kind": "semi_synthetic", "tau_grid": (0.5,)},  # no data source
        {"kind": "semi_synthetic", "data_csv": "d.csv", "tau_grid": (0.5,)},
        {"kind": "semi_synthetic", "preset": "standin", "tau_grid": (0.0, 0.5)},
        {"event_risk": "tree"},
        {"kappa": 1.5},
    ]
    for overrides in bad:
        kwargs = {"experiment_id": "x", "kind": "synthetic_sweep", "tau_grid": (0.2,)}
        kwargs.update(overrides)
        with pytest.raises(ValidationError):
            ExperimentConfig(**kwargs)


def test_mixture_sweep_forces_mixture_family():
    cfg = ExperimentConfig(experiment_id="m", kind="mixture_sweep",
                           tau_grid=(0.4,), family="clayton")
    assert cfg.family == "mixture"


def test_config_round_trip_and_unknown_field():
    cfg = ExperimentConfig(
        experiment_id="rt", kind="metric_bias", tau_grid=(0.2, 0.8), seeds=(0, 1, 2),
        n_train=1234, train={"max_epochs": 99, "patience": 50},
        survival_l1={"n_steps": 321},
    )
    doc = json.loads(json.dumps(cfg.to_dict()))
    again = ExperimentConfig.from_dict(doc)
    assert again == cfg
    assert again.train == TrainConfig(max_epochs=99, patience=50)
    doc["budget"] = 7
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(doc)


@pytest.fixture(scope="module")
def tiny_sweep(tmp_path_factory):
    cfg = ExperimentConfig(
        experiment_id="sweep_tiny", kind="synthetic_sweep", family="clayton",
        tau_grid=(0.0, 0.4), seeds=(0, 1), n_train=300, n_val=100, n_test=100,
        train=dict(FAST), survival_l1={"n_steps": 200},
    )
    out = tmp_path_factory.mktemp("sweep")
    return cfg, run_experiment(cfg, out), out


def test_sweep_row_grid_and_order(tiny_sweep):
    cfg, result, _ = tiny_sweep
    assert len(result.rows) == 2 * 2 * 2  # taus x seeds x models
    key = [(r["tau_star"], r["seed"], r["model"]) for r in result.rows]
    assert key == [
        (t, s, m) for t in (0.0, 0.4) for s in (0, 1) for m in ("copula", "independence")
    ]
    for row in result.rows:
        if row["model"] == "independence":
            assert row["tau_hat"] == 0.0
        assert row["survival_l1_event"] >= 0.0
        assert row["r_squared"] is None
    assert result.failures == []


def test_sweep_artifacts_on_disk(tiny_sweep):
    _, _, out = tiny_sweep
    assert json.loads((out / "config.json").read_text())["experiment_id"] == "sweep_tiny"
    assert (out / "arms" / "tau0_seed0" / "truth.json").exists()
    for model in ("copula", "independence"):
        mdir = out / "arms" / "tau0.4_seed1" / model
        for name in ("checkpoint.json", "trace.csv", "report.json"):
            assert (mdir / name).exists()
    assert not (out / "failures.json").exists()


def test_sweep_arms_csv_layout(tiny_sweep):
    cfg, result, out = tiny_sweep
    text = Path(result.arms_csv).read_text().splitlines()
    assert text[0] == ",".join(exp.SWEEP_COLUMNS)
    assert len(text) == 1 + len(result.rows)
    rows = read_rows(result.arms_csv)
    assert rows[0]["r_squared"] == ""  # sweeps have no regression target
    assert float(rows[0]["survival_l1_event"]) == result.rows[0]["survival_l1_event"]


def test_sweep_summary_recomputes_from_arms(tiny_sweep):
    cfg, result, _ = tiny_sweep
    arms = read_rows(result.arms_csv)
    summary = read_rows(result.summary_csv)
    assert len(summary) == 2 * 2 * 2  # taus x models x outcomes
    for rec in summary:
        sub = [
            float(a[f"survival_l1_{rec['outcome']}"])
            for a in arms
            if a["tau_star"] == rec["tau_star"] and a["model"] == rec["model"]
        ]
        assert int(rec["n_seeds"]) == len(sub) == 2
        assert float(rec["mean_survival_l1"]) == pytest.approx(np.mean(sub), abs=1e-15)
        assert float(rec["std_survival_l1"]) == pytest.approx(np.std(sub), abs=1e-15)


def test_semi_synthetic_standin_rows(tmp_path):
    cfg = ExperimentConfig(
        experiment_id="semi_tiny", kind="semi_synthetic", preset="standin",
        family="clayton", tau_grid=(0.5,), seeds=(0,),
        n_train=500, n_val=150, n_test=150,
        train=dict(FAST),
    )
    result = run_experiment(cfg, tmp_path / "semi")
    assert [(r["tau_star"], r["model"]) for r in result.rows] == [
        ("", "no_censoring"), (0.5, "copula"), (0.5, "independence")
    ]
    for row in result.rows:
        assert row["r_squared"] is not None
    summary = read_rows(result.summary_csv)
    assert [s["model"] for s in summary] == ["no_censoring", "copula", "independence"]
    assert summary[0]["tau_star"] == ""
    assert (tmp_path / "semi" / "arms" / "seed0" / "tau0.5" / "copula" / "report.json").exists()


def test_failed_arm_is_recorded_not_fatal(tmp_path, monkeypatch):
    real = exp._metric_bias_arm

    def flaky(payload):
        if payload[1] == 1:
            raise RuntimeError("boom")
        return real(payload)

    monkeypatch.setattr(exp, "_metric_bias_arm", flaky)
    cfg = ExperimentConfig(
        experiment_id="bias_flaky", kind="metric_bias", tau_grid=(0.2,),
        seeds=(0, 1), n_train=300,
    )
    result = run_experiment(cfg, tmp_path / "flaky")
    assert len(result.rows) == 1 and result.rows[0]["seed"] == 0
    assert result.failures == [{"arm": "1", "error": "RuntimeError", "message": "boom"}]
    assert json.loads((tmp_path / "flaky" / "failures.json").read_text()) == result.failures


def test_all_arms_failing_raises(tmp_path, monkeypatch):
    def broken(payload):
        raise RuntimeError("boom")

    monkeypatch.setattr(exp, "_metric_bias_arm", broken)
    cfg = ExperimentConfig(
        experiment_id="bias_dead", kind="metric_bias", tau_grid=(0.2,),
        seeds=(0, 1), n_train=300,
    )
    with pytest.raises(NumericalFailure, match="all 2 experiment arms failed"):
        run_experiment(cfg, tmp_path / "dead")
    assert len(json.loads((tmp_path / "dead" / "failures.json").read_text())) == 2


def test_parallel_workers_match_serial(tmp_path):
    cfg = ExperimentConfig(
        experiment_id="bias_par", kind="metric_bias", tau_grid=(0.2, 0.6),
        seeds=(0, 1), n_train=300,
    )
    serial = run_experiment(cfg, tmp_path / "serial", workers=1)
    parallel = run_experiment(cfg, tmp_path / "parallel", workers=2)

    def strip(rows):
        return [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]

    assert strip(serial.rows) == strip(parallel.rows)
    assert Path(serial.summary_csv).read_bytes() == Path(parallel.summary_csv).read_bytes()
