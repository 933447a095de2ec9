import csv
import json

import numpy as np
import pytest

from ddc.bench import (
    BenchConfig,
    ConfigError,
    MonteCarloRow,
    cmd_figure1,
    cmd_montecarlo,
    cmd_pipeline,
    figure1_traces,
    noise_digest,
    run_montecarlo,
)
from ddc.cli import main
from ddc.io import load_matrix_file
from ddc.synthesis import ControllerGain


def test_defaults_match_paper_settings():
    c = BenchConfig()
    assert (c.s0, c.l, c.delta, c.gamma) == (0.5, 4, 0.2, 0.5)
    assert c.noise_levels == (0.5, 1.0, 1.5, 2.0, 2.2, 2.4) and c.trials == 100


def test_config_file_and_unknown_fields(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"delta": 0.1, "trials": 3}))
    c = BenchConfig.from_file(path, seed=9)
    assert (c.delta, c.trials, c.seed) == (0.1, 3, 9)
    path.write_text(json.dumps({"deltaa": 0.1}))
    with pytest.raises(ConfigError):
        BenchConfig.from_file(path)


def test_montecarlo_row_percentage():
    assert MonteCarloRow(0.5, 20, 7).percentage == 35.0
    with pytest.raises(ValueError):
        MonteCarloRow(0.5, 0, 0)


def test_montecarlo_rejects_zero_trials(tmp_path):
    with pytest.raises(ConfigError):
        run_montecarlo(BenchConfig(trials=0, out=str(tmp_path)))


def test_pipeline_noiseless(tmp_path):
    code, summary = cmd_pipeline(BenchConfig(delta=0.0, methods=("robust",), out=str(tmp_path)))
    stage = summary["stages"]["build-descriptor"]
    assert stage["noiseless_recovery"]["passed"]
    assert summary["stages"]["verify-robust"]["stable"]
    assert code == 0
    for name in ("exp1.json", "exp2.json", "descriptor.json", "controller_robust.json", "summary.json"):
        assert (tmp_path / name).exists()
    assert "oracle_W" not in load_matrix_file(tmp_path / "exp1.json")


def test_pipeline_with_oracle_writes_noise(tmp_path):
    code, summary = cmd_pipeline(BenchConfig(methods=("robust",), with_oracle=True, out=str(tmp_path)))
    assert "oracle_W" in load_matrix_file(tmp_path / "exp1.json")
    assert max(summary["stages"]["build-descriptor"]["residuals"].values()) <= 1e-8


def test_pipeline_missing_plant(tmp_path):
    code, summary = cmd_pipeline(BenchConfig(plant=str(tmp_path / "missing.json"), out=str(tmp_path)))
    assert code != 0 and summary["stages"]["config"]["ok"] is False


def test_montecarlo_files_and_reproducibility(tmp_path):
    cfg = dict(noise_levels=(0.0, 0.2), trials=4, seed=5)
    cmd_montecarlo(BenchConfig(out=str(tmp_path / "a"), **cfg))
    cmd_montecarlo(BenchConfig(out=str(tmp_path / "b"), **cfg))
    for name in ("table.csv", "trials.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "table.csv")))
    assert list(rows[0]) == ["delta", "trials", "successes", "percentage"]
    assert rows[0]["successes"] == "4"
    manifest = load_matrix_file(tmp_path / "a" / "manifest.json")
    assert len(manifest["levels"][0]["seeds"]) == 4


def test_montecarlo_parallel_matches_serial(tmp_path):
    serial, _ = run_montecarlo(BenchConfig(noise_levels=(0.2,), trials=4, jobs=1))
    parallel, _ = run_montecarlo(BenchConfig(noise_levels=(0.2,), trials=4, jobs=2))
    assert serial == parallel


def test_figure1_shared_noise(plant):
    F1 = np.array([[0.3815, -0.6629, -0.5368], [-0.1548, 0.6346, 1.2579]])
    F2 = np.array([[-0.1788, -0.4381, -0.3199], [-0.2071, 0.2021, 0.9403]])
    a, b = figure1_traces(plant, F1, F2, 0.2, 3, 50)
    assert noise_digest(a.w) == noise_digest(b.w)
    a0, b0 = figure1_traces(plant, F1, F2, 0.0, 3, 50)
    assert not a0.y.any() and not b0.y.any()


def test_figure1_files(tmp_path):
    F = np.array([[0.3815, -0.6629, -0.5368], [-0.1548, 0.6346, 1.2579]])
    g = ControllerGain(F=F, method="robust", eps=1.0, margins={})
    h = ControllerGain(F=F, method="hinf", eps=1.0, margins={}, gamma=0.5)
    cmd_figure1(BenchConfig(out=str(tmp_path), figure_steps=20), g, h)
    rows = list(csv.reader(open(tmp_path / "y_robust.csv")))
    assert rows[0] == ["k", "y1", "y2"] and len(rows) == 21
    assert (tmp_path / "y_robust.csv").read_bytes() == (tmp_path / "y_hinf.csv").read_bytes()


def test_cli_round_trip(tmp_path, capsys):
    out = tmp_path
    assert main(["gen", "--out", str(out), "--seed", "2"]) == 0
    assert main(["build-descriptor", "--data", str(out), "--out", str(out / "descriptor.json")]) == 0
    assert main(["synth", "robust", "--descriptor", str(out / "descriptor.json"), "--out", str(out / "c.json")]) == 0
    capsys.readouterr()
    code = main(["verify", "--controller", str(out / "c.json")])
    report = json.loads(capsys.readouterr().out)
    assert code == (0 if report["stable"] else 1)
    assert main(["simulate", "--controller", str(out / "c.json"), "--out", str(out / "sim.csv"), "--steps", "5"]) == 0
    assert (out / "sim.csv").read_text().startswith("k,x1,x2,x3,u1,u2,w1,w2,w3,y1,y2")


def test_cli_global_flags_before_subcommand(tmp_path):
    assert main(["--seed", "4", "--out", str(tmp_path), "--with-oracle", "gen"]) == 0
    assert "oracle_W0" in load_matrix_file(tmp_path / "exp2.json")


def test_cli_missing_plant_exits_nonzero(tmp_path):
    assert main(["gen", "--plant", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) != 0


def test_cli_reproducible_gen(tmp_path):
    main(["gen", "--out", str(tmp_path / "a"), "--seed", "8"])
    main(["gen", "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a" / "exp1.json").read_bytes() == (tmp_path / "b" / "exp1.json").read_bytes()
