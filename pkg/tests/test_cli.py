import json

import numpy as np
import pytest
from click.testing import CliRunner

from regulata.cli import (EXIT_CONFIG, EXIT_DIVERGED, EXIT_INFEASIBLE,
                          EXIT_USAGE, main)


@pytest.fixture()
def runner():
    return CliRunner()


def write_config(path, **overrides):
    cfg = {
        "plant": "robot",
        "internal_model": {"k": 1, "n_y": 1},
        "data": {"experiment": {"T": 20, "sample_dt": 0.01,
                                "input_bound": 0.5,
                                "exo_init_bound": 0.0025,
                                "noise_bound": 0.01, "seed": 3,
                                "mode": "restarts",
                                "restart_radius": 1.0}},
        "delta": {"mode": "oracle", "rho": 1.1},
        "simulation": {"x0": [1.0, 0.0], "v0": [0.5, 0.0, 0.5, 0.0]},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def test_unknown_example_usage_error(runner):
    res = runner.invoke(main, ["example", "ex9"])
    assert res.exit_code == EXIT_USAGE


def test_example_ex1_outputs(runner, tmp_path):
    res = runner.invoke(main, ["example", "ex1", "--seed", "0",
                               "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    outdir = tmp_path / "ex1-seed0"
    for name in ("gains.json", "metrics.json", "trajectory.csv",
                 "errors.svg", "manifest.json"):
        assert (outdir / name).exists()
    metrics = json.loads((outdir / "metrics.json").read_text())
    assert metrics["tail_sup_error"] <= 1e-2
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert "gains.json" in manifest["files"]


def test_malformed_config(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    res = runner.invoke(main, ["synthesize", str(bad)])
    assert res.exit_code == EXIT_CONFIG
    assert "line" in res.output


def test_synthesize_simulate_roundtrip(runner, tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    synout = tmp_path / "syn"
    res = runner.invoke(main, ["synthesize", str(cfg),
                               "--out", str(synout)])
    assert res.exit_code == 0, res.output
    gains = json.loads((synout / "gains.json").read_text())
    assert np.asarray(gains["Kx"]).shape == (1, 2)
    report = json.loads((synout / "synthesis_report.json").read_text())
    assert report["margin"] > 0

    simout = tmp_path / "sim"
    res = runner.invoke(main, ["simulate", str(cfg),
                               str(synout / "gains.json"),
                               "--out", str(simout), "--t-end", "50"])
    assert res.exit_code == 0, res.output
    metrics = json.loads((simout / "metrics.json").read_text())
    assert metrics["tail_sup_error"] <= 1e-2


def test_simulate_gain_dimension_mismatch(runner, tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    gains = tmp_path / "gains.json"
    gains.write_text(json.dumps({"Kx": [[1.0, 2.0, 3.0]],
                                 "Kz": [[0.0, 0.0, 0.0, 0.0]]}))
    res = runner.invoke(main, ["simulate", str(cfg), str(gains),
                               "--out", str(tmp_path / "sim")])
    assert res.exit_code == EXIT_CONFIG


def test_synthesize_infeasible_exit(runner, tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        plant={"linear": {"A": [[0.0, 1.0], [1.0, 2.0]],
                          "B": [[0.0], [0.0]],
                          "C": [[1.0, 0.0]],
                          "E": [[0.0, 0.0, 0.0, 0.0],
                                [1.0, 0.0, 0.0, 0.0]],
                          "F": [[-1.0, 0.0, -1.0, 0.0]]}})
    res = runner.invoke(main, ["synthesize", str(cfg),
                               "--out", str(tmp_path / "syn")])
    assert res.exit_code == EXIT_INFEASIBLE


def test_simulate_divergence_exit(runner, tmp_path):
    cfg = write_config(tmp_path / "cfg.json",
                       simulation={"x0": [1.0, 0.0],
                                   "v0": [0.5, 0.0, 0.5, 0.0]})
    gains = tmp_path / "gains.json"
    gains.write_text(json.dumps({"Kx": [[50.0, 50.0]],
                                 "Kz": [[0.0, 0.0, 0.0, 0.0]]}))
    res = runner.invoke(main, ["simulate", str(cfg), str(gains),
                               "--out", str(tmp_path / "sim")])
    assert res.exit_code == EXIT_DIVERGED
