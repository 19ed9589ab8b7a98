"""End-to-end runs of the command line interface, in process."""
import json
from pathlib import Path

import numpy as np
import pytest

import copsurv
from copsurv.cli import main
from copsurv.datagen import synthetic_regression


def run(*argv):
    return main([str(a) for a in argv])


def write_regression_csv(path, n=250, d=4, seed=0, negate=False):
    x, y = synthetic_regression(n, d, seed)
    if negate:
        y = y - y.max() - 1.0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"x{j}" for j in range(d)] + ["y"]) + "\n")
        for i in range(n):
            cells = [repr(float(v)) for v in x[i]] + [repr(float(y[i]))]
            fh.write(",".join(cells) + "\n")


def test_help_and_bad_args_exit_codes(capsys):
    assert run("--help") == 0
    assert run("generate", "--help") == 0
    assert run() == 1                      # no subcommand
    assert run("generate") == 1            # missing required flags
    assert run("generate", "--family", "gumbel", "--tau", "0.5", "--out", "x") == 1
    capsys.readouterr()


def test_generate_writes_dataset_and_truth(tmp_path, capsys):
    out = tmp_path / "gen"
    assert run("generate", "--preset", "linear_risk", "--n", 1000, "--family", "clayton",
               "--tau", 0.5, "--seed", 7, "--out", out) == 0
    assert "censoring fraction" in capsys.readouterr().out
    for name in ("data.csv", "latent.csv", "truth.json"):
        assert (out / name).exists()
    doc = json.loads((out / "truth.json").read_text())
    assert doc["nu_E"] == 4.0 and doc["rho_E"] == 14.0
    assert doc["copula"]["family"] == "clayton"
    assert doc["tau"] == 0.5
    header = (out / "data.csv").read_text().splitlines()[0]
    assert header.endswith("time,event")


def test_generate_tau_zero_is_independence(tmp_path, capsys):
    out = tmp_path / "indep"
    assert run("generate", "--tau", 0.0, "--n", 200, "--out", out) == 0
    doc = json.loads((out / "truth.json").read_text())
    assert doc["copula"]["family"] == "independence"
    capsys.readouterr()


def test_generate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ("generate", "--tau", 0.4, "--n", 500, "--seed", 3)
    assert run(*args, "--out", a) == 0
    assert run(*args, "--out", b) == 0
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "truth.json").read_bytes() == (b / "truth.json").read_bytes()
    capsys.readouterr()


def test_generate_rejects_degenerate_tau(tmp_path, capsys):
    assert run("generate", "--tau", 1.0, "--out", tmp_path / "x") == 1
    assert "error:" in capsys.readouterr().err


def test_censor_writes_metadata(tmp_path, capsys):
    src = tmp_path / "reg.csv"
    write_regression_csv(src)
    out = tmp_path / "cens"
    assert run("censor", "--data", src, "--target", "y", "--family", "frank",
               "--tau", 0.5, "--seed", 1, "--out", out) == 0
    assert (out / "data.csv").exists()
    meta = json.loads((out / "censoring.json").read_text())
    assert meta["target_column"] == "y"
    assert meta["copula"]["family"] == "frank"
    assert 0.0 < meta["censoring_fraction"] < 1.0
    # censoring marginal reuses the event fit with a softened shape
    nu_e = np.exp(meta["event_model"]["log_nu"])
    nu_c = np.exp(meta["censor_model"]["log_nu"])
    assert nu_c == pytest.approx(nu_e / 0.6, rel=1e-12)
    assert len(meta["standardize_mean"]) == 4
    assert meta["shift"] == 0.0
    capsys.readouterr()


def test_censor_nonpositive_targets_need_shift_flag(tmp_path, capsys):
    src = tmp_path / "neg.csv"
    write_regression_csv(src, negate=True)
    assert run("censor", "--data", src, "--target", "y", "--tau", 0.3,
               "--out", tmp_path / "c1") == 1
    assert run("censor", "--data", src, "--target", "y", "--tau", 0.3, "--shift",
               "--out", tmp_path / "c2") == 0
    meta = json.loads((tmp_path / "c2" / "censoring.json").read_text())
    assert meta["shift"] > 0.0
    capsys.readouterr()


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """A small generated dataset with a short clayton fit on top."""
    root = tmp_path_factory.mktemp("cli_train")
    data_dir = root / "data"
    assert run("generate", "--tau", 0.5, "--n", 400, "--seed", 2, "--out", data_dir) == 0
    cfg = root / "train.json"
    cfg.write_text(json.dumps(
        {"max_epochs": 60, "patience": 60, "validation_fraction": 0.25, "seed": 0}
    ))
    fit_dir = root / "fit"
    code = run("train", "--data", data_dir / "data.csv", "--family", "clayton",
               "--config", cfg, "--out", fit_dir)
    assert code == 0
    return data_dir, cfg, fit_dir


def test_train_outputs(trained, capsys):
    data_dir, cfg, fit_dir = trained
    assert (fit_dir / "checkpoint.json").exists()
    trace_header = (fit_dir / "trace.csv").read_text().splitlines()[0]
    assert trace_header == "epoch,train_negloglik,val_negloglik,theta_hat"
    # stdout summary was printed during the fixture; rerun cheaply to capture it
    out_dir = fit_dir.parent / "fit2"
    assert run("train", "--data", data_dir / "data.csv", "--family", "independence",
               "--config", cfg, "--out", out_dir) == 0
    text = capsys.readouterr().out
    assert "val_negloglik=" in text and "tau_hat=" in text
    indep_header = (out_dir / "trace.csv").read_text().splitlines()[0]
    assert indep_header == "epoch,train_negloglik,val_negloglik"


def test_train_mixture_trace_columns(trained, capsys):
    data_dir, _, fit_dir = trained
    cfg = fit_dir.parent / "mix.json"
    cfg.write_text(json.dumps({"max_epochs": 5, "patience": 5, "validation_fraction": 0.25}))
    out_dir = fit_dir.parent / "mix"
    assert run("train", "--data", data_dir / "data.csv", "--family", "mixture",
               "--config", cfg, "--out", out_dir) == 0
    header = (out_dir / "trace.csv").read_text().splitlines()[0]
    assert header == "epoch,train_negloglik,val_negloglik,theta_frank,theta_clayton,kappa"
    capsys.readouterr()


def test_evaluate_report(trained, tmp_path, capsys):
    data_dir, _, fit_dir = trained
    report_path = tmp_path / "report.json"
    assert run("evaluate", "--checkpoint", fit_dir / "checkpoint.json",
               "--data", data_dir / "data.csv", "--truth", data_dir / "truth.json",
               "--out", report_path) == 0
    printed = capsys.readouterr().out
    doc = json.loads(report_path.read_text())
    assert json.loads(printed) == doc
    assert set(doc) == {"c_index", "brier", "survival_l1_event", "survival_l1_censor", "tau_hat"}
    assert 0.0 <= doc["c_index"] <= 1.0
    assert doc["survival_l1_event"] >= 0.0

    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads(
        (Path(copsurv.__file__).parent / "schemas" / "evaluation_report.schema.json").read_text()
    )
    jsonschema.validate(doc, schema)


def test_evaluate_without_truth_omits_l1(trained, tmp_path, capsys):
    data_dir, _, fit_dir = trained
    report_path = tmp_path / "bare.json"
    assert run("evaluate", "--checkpoint", fit_dir / "checkpoint.json",
               "--data", data_dir / "data.csv", "--out", report_path) == 0
    doc = json.loads(report_path.read_text())
    assert set(doc) == {"c_index", "brier", "tau_hat"}
    capsys.readouterr()


def test_missing_files_exit_three(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "nope.csv", "--out", tmp_path / "o") == 3
    assert run("evaluate", "--checkpoint", tmp_path / "nope.json",
               "--data", tmp_path / "nope.csv", "--out", tmp_path / "r.json") == 3
    err = capsys.readouterr().err
    assert "io error:" in err


def test_malformed_data_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,when,what\n0.1,1.0,1\n")
    assert run("train", "--data", bad, "--out", tmp_path / "o") == 1
    assert "error:" in capsys.readouterr().err


def test_experiment_tiny_run(tmp_path, capsys):
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps({
        "experiment_id": "bias_tiny",
        "kind": "metric_bias",
        "tau_grid": [0.2],
        "seeds": [0],
        "n_train": 400,
    }))
    out = tmp_path / "exp"
    assert run("experiment", "--config", cfg_path, "--out", out) == 0
    assert "wrote 1 rows" in capsys.readouterr().out
    assert json.loads((out / "config.json").read_text())["experiment_id"] == "bias_tiny"
    header = (out / "arms.csv").read_text().splitlines()[0]
    assert header == ("experiment_id,tau_star,seed,c_index_uncensored,c_index_censored,"
                      "c_index_abs_diff,brier_uncensored,brier_censored,brier_abs_diff,"
                      "censoring_fraction,wall_time_s")
    assert (out / "summary.csv").exists()
    assert not (out / "failures.json").exists()


def test_experiment_all_arms_failing_exits_two(tmp_path, capsys):
    cfg_path = tmp_path / "exp.json"
    cfg_path.write_text(json.dumps({
        "experiment_id": "semi_broken",
        "kind": "semi_synthetic",
        "tau_grid": [0.5],
        "seeds": [0],
        "data_csv": str(tmp_path / "does_not_exist.csv"),
        "target_column": "y",
    }))
    assert run("experiment", "--config", cfg_path, "--out", tmp_path / "out") == 2
    assert "numerical failure:" in capsys.readouterr().err
