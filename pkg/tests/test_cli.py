import json
import os
import subprocess
import sys

import pytest

from socialml.cli import main

TINY = {"monte_carlo": {"training_sets": 2, "runs_per_set": 100, "mean_estimation": 1000},
        "N": 40, "S": 5, "N0_list": [20, 40], "model": {"epochs": 3}, "target_risk": 0.5,
        "delta_grid": [0.0, 0.05], "S_grid": [100, 500, 2000]}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize(
    "command, files",
    [
        ("train", ["agents.json", "training_0.csv", "training_8.csv"]),
        ("predict-stream", ["stream.csv"]),
        ("predict-single", ["single.json"]),
        ("bounds", ["bounds.json", "stream_bounds.csv"]),
        ("mc-error", ["errors.csv", "margins.csv"]),
        ("margin-sweep", ["margins.csv", "margins_summary.csv", "single_sample.csv"]),
        ("adaboost-baseline", ["errors.csv"]),
        ("spectral", ["spectral.csv"]),
    ],
)
def test_subcommands_succeed(command, files, config, tmp_path):
    out = tmp_path / "out"
    assert run(command, "--config", config, "--seed", 3, "--out", out) == 0
    for name in files:
        assert (out / name).stat().st_size > 0


def test_stream_and_agents_reuse(config, tmp_path):
    assert run("train", "--config", config, "--seed", 1, "--out", tmp_path / "a") == 0
    agents = tmp_path / "a" / "agents.json"
    assert run("predict-stream", "--config", config, "--seed", 1, "--out", tmp_path / "b",
               "--agents", agents, "--runs", 2, "--label", "-1") == 0
    lines = (tmp_path / "b" / "stream.csv").read_text().splitlines()
    assert lines[0] == "run,agent,time,lambda,decision" and len(lines) == 1 + 2 * 5 * 9
    obs = json.dumps([[0.3], [0.1, 0.2], [0.1, 0.0, 0.2]] * 3)
    assert run("predict-single", "--config", config, "--seed", 1, "--out", tmp_path / "c",
               "--agents", agents, "--observations", obs) == 0
    doc = json.loads((tmp_path / "c" / "single.json").read_text())
    assert doc["decision"] in (-1, 0, 1) and doc["rounds"] >= 1


def test_train_from_csv(config, tmp_path):
    assert run("train", "--config", config, "--seed", 1, "--out", tmp_path / "a") == 0
    csvs = [tmp_path / "a" / f"training_{k}.csv" for k in range(9)]
    assert run("train", "--config", config, "--seed", 1, "--out", tmp_path / "b", "--train-csv", *csvs) == 0
    a = json.loads((tmp_path / "a" / "agents.json").read_text())["agents"]
    b = json.loads((tmp_path / "b" / "agents.json").read_text())["agents"]
    assert a == b


def test_bounds_records_oversized_margin(config, tmp_path):
    assert run("bounds", "--config", config, "--out", tmp_path, "--delta", 0.05, 5.0) == 0
    doc = json.loads((tmp_path / "bounds.json").read_text())
    assert "error" in doc["reports"][1] and doc["reports"][0]["delta"] == 0.05


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"N": 41}))
    assert run("spectral", "--config", bad, "--out", tmp_path) == 2
    assert run("spectral", "--config", tmp_path / "missing.json", "--out", tmp_path) == 2
    (tmp_path / "garbage.json").write_text("{")
    assert run("mc-error", "--config", tmp_path / "garbage.json", "--out", tmp_path) == 2


def test_invalid_flags_exit_2(config, tmp_path):
    assert run("mc-error", "--config", config, "--out", tmp_path, "--workers", 0) == 2
    assert run("predict-stream", "--config", config, "--out", tmp_path, "--agents", tmp_path / "none.json") == 2
    with pytest.raises(SystemExit) as info:
        run("spectral", "--config", config, "--out", tmp_path, "--seed", -1)
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        run("spectral", "--config", config, "--out", tmp_path, "--seed", 2**64)


def test_numeric_failure_exit_3(tmp_path):
    # one combination round cannot reach the requested consensus tolerance
    doc = dict(TINY, consensus={"tol": 1e-14, "t_max": 2})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    assert run("predict-single", "--config", path, "--out", tmp_path / "o") == 3


def test_console_script_entry():
    out = subprocess.run([sys.executable, "-m", "socialml.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "mc-error" in out.stdout


def _csv_outputs(directory):
    return {n: open(os.path.join(directory, n), "rb").read() for n in sorted(os.listdir(directory))
            if n.endswith(".csv")}


@pytest.mark.parametrize("command", ["mc-error", "margin-sweep", "adaboost-baseline", "predict-stream", "spectral"])
def test_outputs_identical_across_runs_and_workers(command, config, tmp_path):
    outs = []
    for i, workers in enumerate((1, 1, 8)):
        d = tmp_path / f"r{i}"
        assert run(command, "--config", config, "--seed", 11, "--out", d, "--workers", workers) == 0
        outs.append(_csv_outputs(d))
    assert outs[0] and outs[0] == outs[1] == outs[2]
