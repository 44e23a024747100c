"""Tests for the command-line interface."""

import json

import pytest

from ttnlearn.cli import main
from ttnlearn.network import load

FAST = {"max_iterations": 3, "n_tree_trials": 3, "max_sweeps": 3}


def test_bench_writes_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(
        [
            "bench",
            "--function",
            "i",
            "--n",
            "150",
            "--trials",
            "1",
            "--seed",
            "2",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["spec"]["function"] == "i"
    assert len(report["trials"]) == 1


def test_fit_saves_model_and_report(tmp_path):
    config = {
        "function": "i",
        "n_train": 150,
        "n_test": 100,
        "seed": 5,
        "config": FAST,
        "model_out": str(tmp_path / "model.json"),
        "report_out": str(tmp_path / "report.json"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert main(["fit", "--config", str(path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    net = load(str(tmp_path / "model.json"))
    assert net.tree.d == 6
    assert report["test_error"] >= 0.0
    # The saved model is the one described by the report.
    assert net.tree.to_text() == report["tree"]


def test_fit_report_to_stdout(tmp_path, capsys):
    config = {"function": "i", "n_train": 120, "n_test": 50, "config": FAST}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert main(["fit", "--config", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert "test_error" in report


def test_inspect_prints_summary(tmp_path, capsys):
    config = {
        "function": "i",
        "n_train": 120,
        "n_test": 50,
        "config": FAST,
        "model_out": str(tmp_path / "model.json"),
        "report_out": str(tmp_path / "report.json"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert main(["fit", "--config", str(path)]) == 0
    capsys.readouterr()
    assert main(["inspect", "--model", str(tmp_path / "model.json")]) == 0
    out = capsys.readouterr().out
    assert "tree:" in out and "storage complexity:" in out


def test_error_paths_return_nonzero(tmp_path, capsys):
    assert main(["inspect", "--model", str(tmp_path / "missing.json")]) == 1
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"function": "zz", "n_train": 10}))
    assert main(["fit", "--config", str(bad)]) == 1


def test_unknown_function_choice_rejected():
    with pytest.raises(SystemExit):
        main(["bench", "--function", "zz", "--n", "10"])
