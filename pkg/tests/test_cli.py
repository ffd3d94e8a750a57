import csv
import json

import pytest
import yaml

from fdedelay.cli import DEFAULTS, ConfigError, Suite, load_config, main

SMALL = ["--set", "grid.N=400", "--set", "grid.r_max=20", "--set", "solver.t_end=1.0"]


def test_defaults_resolve():
    cfg = load_config()
    assert cfg == DEFAULTS or cfg["grid"]["N"] == 4000
    assert load_config(overrides=["model.m=0.8"])["model"]["m"] == 0.8


@pytest.mark.parametrize("text", ["model: [1, 2", "model: {q: 1}", "grid: 5", "- a\n- b",
                                  "model: {m: 1.5}", "grid: {N: 3}"])
def test_malformed_config_exit_2(tmp_path, capsys, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.yaml"))
    assert main(["run", "--set", "solver.t_end"]) == 2


def test_run_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", *SMALL, "--out", str(out)]) == 0
    for name in ("diagnostics.csv", "framemap.csv", "report.json", "final_field.csv", "config.yaml"):
        assert (out / name).is_file()
    report = json.loads((out / "report.json").read_text())
    assert report["delta"] >= -report["delta_error"]
    assert yaml.safe_load((out / "config.yaml").read_text())["grid"]["N"] == 400
    assert "delta =" in capsys.readouterr().out


def test_barenblatt_run_delta_zero(tmp_path):
    out = tmp_path / "b"
    assert main(["run", *SMALL, "--set", "initial.kind=barenblatt", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert abs(report["delta"]) <= report["delta_error"] + 1e-12


def test_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", *SMALL, "--out", str(out)]) == 0
    for name in ("diagnostics.csv", "framemap.csv", "report.json", "final_field.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", *SMALL, "--param", "m", "--values", "0.7,0.8", "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["value"]) for r in rows] == [0.7, 0.8]
    assert all(r["error"] == "" for r in rows)


@pytest.mark.parametrize("values", ["", "0.8", "0.5,1.2"])
def test_bad_sweep_exit_2(tmp_path, values):
    assert main(["sweep", "--values", values, "--out", str(tmp_path)]) == 2


def test_verify_only_constants(capsys):
    assert main(["verify", "--only", "constants"]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("[")]
    assert len(lines) == 1 and lines[0].startswith("[PASS]  1 constants")
    assert main(["verify", "--only", "nonsense"]) == 2


def test_suite_caches_runs():
    suite = Suite(load_config(overrides=["grid.N=400", "grid.r_max=20", "solver.t_end=1.0"]))
    assert suite.default_run() is suite.default_run()
    assert suite.barenblatt_run() is not suite.default_run()
