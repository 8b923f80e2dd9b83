import json
import subprocess
import sys

import numpy as np
import pytest

from matlda import io
from matlda.cli import EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, run_cli
from matlda.errors import DivergenceError

SMALL = ["--n", "60", "--p", "8", "--q", "8", "--amplitude", "0.5", "--test-size", "80"]


@pytest.fixture
def sim(tmp_path):
    out = tmp_path / "sim"
    assert run_cli(["simulate", *SMALL, "--seed", "3", "--out", str(out)]) == EXIT_OK
    return out


def test_simulate_layout(sim):
    assert (sim / "train" / "manifest.json").exists()
    assert (sim / "test" / "manifest.json").exists()
    assert io.load_dataset(sim / "train" / "manifest.json").n == 60
    assert io.read_pgm(sim / "signal.pgm").shape == (8, 8)
    doc = io.parse_report((sim / "study.txt").read_text())
    assert doc["study"]["seed"] == "3" and doc["study"]["signal.shape"] == "cross"


def test_tune_predict_evaluate(sim, tmp_path, capsys):
    model = tmp_path / "m.json"
    path = tmp_path / "path.csv"
    assert run_cli(["tune", "--manifest", str(sim / "train" / "manifest.json"),
                    "--out", str(path), "--model", str(model)]) == EXIT_OK
    lines = path.read_text().splitlines()
    assert lines[0] == "index,omega,rss,df,bic,rank,valid,selected"
    assert sum(line.endswith(",1") for line in lines[1:]) == 1
    assert model.with_suffix(".pgm").exists()
    pred = tmp_path / "pred.csv"
    assert run_cli(["predict", "--model", str(model), "--manifest", str(sim / "test" / "manifest.json"),
                    "--out", str(pred)]) == EXIT_OK
    assert pred.read_text().splitlines()[0] == "name,label,score"
    rep = tmp_path / "eval.txt"
    assert run_cli(["evaluate", str(pred), "--manifest", str(sim / "test" / "manifest.json"),
                    "--out", str(rep)]) == EXIT_OK
    doc = io.parse_report(rep.read_text())
    conf = doc["confusion"]
    assert sum(int(v) for v in conf.values()) == 80
    errors = int(conf["true1_pred2"]) + int(conf["true2_pred1"])
    assert float(doc["evaluation"]["rate"]) == pytest.approx(errors / 80)


def test_fit_round_trip_matches_direct_predictions(sim, tmp_path):
    from matlda import FitConfig, fit_matrix_lda

    model = tmp_path / "m.json"
    man = sim / "train" / "manifest.json"
    assert run_cli(["fit", "--manifest", str(man), "--omega", "0.05", "--out", str(model)]) == EXIT_OK
    loaded, meta = io.load_model(model)
    direct = fit_matrix_lda(io.load_dataset(man), FitConfig(omega=0.05))
    test = io.load_dataset(sim / "test" / "manifest.json")
    np.testing.assert_array_equal(loaded.predict(test.X), direct.predict(test.X))
    assert meta["config"]["omega"] == 0.05


def test_fit_shape_mismatch_exits_2_naming_file(sim, tmp_path, capsys):
    man = sim / "train" / "manifest.json"
    doc = json.loads(man.read_text())
    for e in doc["entries"]:
        e.pop("sha256")
    man.write_text(json.dumps(doc))
    io.save_matrix_csv(np.zeros((3, 3)), sim / "train" / "x07.csv")
    io.save_matrix_csv(np.zeros((3, 3)), sim / "train" / "x09.csv")
    code = run_cli(["fit", "--manifest", str(man), "--omega", "0.1", "--out", str(tmp_path / "m.json")])
    assert code == EXIT_DATA
    err = capsys.readouterr().err
    assert "x07.csv" in err and "x09.csv" not in err


def test_unknown_flag_is_usage_error(capsys):
    assert run_cli(["mc", "--shape", "cross", "--bogus", "1"]) == EXIT_USAGE
    assert "--bogus" in capsys.readouterr().err


def test_bad_values_are_usage_errors(capsys):
    assert run_cli(["mc", "--pi1", "1.5"]) == EXIT_USAGE
    assert run_cli(["mc", "--shape", "circle"]) == EXIT_USAGE
    assert run_cli(["fit", "--manifest", "m.json", "--omega", "-1"]) == EXIT_USAGE
    assert run_cli([]) == EXIT_USAGE


def test_missing_manifest_is_data_error(tmp_path):
    assert run_cli(["fit", "--manifest", str(tmp_path / "none.json"), "--omega", "1"]) == EXIT_DATA


def test_divergence_exit_code(sim, tmp_path, monkeypatch):
    from matlda import cli

    def boom(*a, **k):
        raise DivergenceError(12)

    monkeypatch.setattr(cli, "fit_matrix_lda", boom)
    code = run_cli(["fit", "--manifest", str(sim / "train" / "manifest.json"), "--omega", "1",
                    "--out", str(tmp_path / "m.json")])
    assert code == EXIT_DIVERGED


def test_mc_report_carries_config(tmp_path):
    out = tmp_path / "r.txt"
    assert run_cli(["mc", *SMALL, "--replicates", "3", "--seed", "4", "--loss", "squared",
                    "--grid-size", "10", "--out", str(out)]) == EXIT_OK
    doc = io.parse_report(out.read_text())
    assert doc["study"]["replicates"] == "3" and doc["study"]["n"] == "60"
    assert doc["fit"]["loss"] == "squared" and doc["grid"]["size"] == "10"
    assert len(doc["replicates"]) == 3


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "matlda.cli", "mc", "--nope"], capture_output=True, text=True)
    assert res.returncode == EXIT_USAGE
