import json

import pandas as pd
import pytest
import yaml

from app.cli import main


def _simulate(out, *extra):
    return main(["simulate", "--model", "ba", "--param", "n_final=30", "--seed", "3", "--out", str(out), *extra])


def test_simulate_is_byte_reproducible(tmp_path, capsys):
    assert _simulate(tmp_path / "a") == 0
    assert _simulate(tmp_path / "b") == 0
    for name in ("trajectory.gna", "final.gna", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["summary"]["nodes"] == 30
    assert manifest["artifacts"] == ["final.gna", "trajectory.gna"]
    assert str(tmp_path / "a") in capsys.readouterr().out


def test_simulate_csv_summary(tmp_path):
    assert _simulate(tmp_path, "--format", "csv", "--steps", "5") == 0
    frame = pd.read_csv(tmp_path / "summary.csv")
    assert list(frame.columns) == ["time", "nodes", "links"]
    assert frame["time"].tolist() == [0, 1, 2, 3, 4, 5]
    assert not (tmp_path / "trajectory.gna").exists()


def test_missing_seed_exits_with_config_code(tmp_path, capsys):
    code = main(["simulate", "--model", "ba", "--out", str(tmp_path)])
    assert code == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_model_exits_with_config_code(tmp_path):
    assert main(["simulate", "--model", "small_world", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_step_bound_exits_with_parameter_code(tmp_path):
    assert _simulate(tmp_path, "--steps", "1000000") == 2
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["artifacts"] == []
    assert manifest["summary"] == {}
    assert manifest["error"]["type"] == "ParameterError"
    assert manifest["error"]["exit_code"] == 2
    assert "MAX_STEPS" in manifest["error"]["message"]
    assert not (tmp_path / "trajectory.gna").exists()


def test_unwritable_output_exits_with_path_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _simulate(blocker) == 9


def test_config_file_with_flag_override(tmp_path):
    config = tmp_path / "ba.yaml"
    config.write_text(yaml.safe_dump({"model": "ba", "seed": 1, "params": {"n_final": 20}}))
    assert main(["simulate", "--config", str(config), "--param", "n_final=12", "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["summary"]["nodes"] == 12
    assert manifest["config"]["params"] == {"n_final": 12}


def test_discover_on_simulated_trace(tmp_path):
    assert _simulate(tmp_path / "sim") == 0
    trace = tmp_path / "sim" / "trajectory.gna"
    assert main(["discover", "--trace", str(trace), "--seed", "4", "--out", str(tmp_path / "d")]) == 0
    report = json.loads((tmp_path / "d" / "report.json").read_text())
    assert report["events"] == 28
    assert report["distance"] == 0.0
    assert report["reconstruction"]["lookups"] == 28
    assert 0 <= report["reconstruction"]["misses"] <= 28
    assert "lookups missed" in (tmp_path / "d" / "report.txt").read_text()


def test_discover_reports_corrupt_and_malformed_traces(tmp_path):
    assert _simulate(tmp_path / "sim") == 0
    text = (tmp_path / "sim" / "trajectory.gna").read_text()
    corrupt = tmp_path / "corrupt.gna"
    corrupt.write_text(text.replace('["step",1,', '["step",7,', 1))
    assert main(["discover", "--trace", str(corrupt), "--out", str(tmp_path / "c")]) == 5
    broken = tmp_path / "broken.gna"
    broken.write_text(text.replace("]", "", 1))
    assert main(["discover", "--trace", str(broken), "--out", str(tmp_path / "b")]) == 3


def test_opnet_writes_tables(tmp_path, repo_data):
    out = tmp_path / "op"
    assert main(["opnet", "--scenario", str(repo_data / "sar_demo.yaml"), "--seed", "1", "--out", str(out)]) == 0
    metrics = pd.read_csv(out / "metrics.csv")
    assert metrics["tick"].iloc[0] == 0
    assert metrics["links"].is_monotonic_increasing
    influence = pd.read_csv(out / "influence.csv")
    assert list(influence.columns) == [
        "node", "agent_class", "size", "fraction", "degree_centrality",
        "removal_components", "removal_largest_fraction",
    ]
    rcc = influence.set_index("node").loc["rcc"]
    assert rcc["removal_components"] > 1
    assert rcc["removal_largest_fraction"] < 1.0
    assert (out / "series.gna").exists()


def test_merger_then_analyze(tmp_path):
    config = tmp_path / "merger.yaml"
    config.write_text(yaml.safe_dump({
        "seed": 5,
        "sweep": {
            "w": [1.0], "b": [1.0], "runs": 1, "iterations": 2, "snapshots": True,
            "overrides": {"n": 8, "within_ties": 20, "between_ties": 4},
        },
    }))
    out = tmp_path / "m"
    assert main(["merger", "--config", str(config), "--runs", "2", "--out", str(out)]) == 0
    frame = pd.read_csv(out / "metrics.csv")
    assert sorted(frame["run"].unique()) == [0, 1]
    snap = out / "snapshots" / "w=1,b=1-run0.gna"
    assert snap.exists()

    assert main(["analyze", str(snap), "--out", str(tmp_path / "a")]) == 0
    analysis = pd.read_csv(tmp_path / "a" / "analysis.csv")
    assert analysis["nodes"].iloc[0] == 16
    merger_rows = pd.read_csv(tmp_path / "a" / "merger_metrics.csv")
    assert {"cross_distance", "turnover", "conflict", "ineffectiveness"} <= set(merger_rows.columns)


def test_analyze_needs_inputs(tmp_path):
    assert main(["analyze", "--out", str(tmp_path)]) == 2
    assert main(["analyze", str(tmp_path / "missing.gna"), "--out", str(tmp_path)]) == 2


def test_models_lists_registry(capsys):
    assert main(["models"]) == 0
    out = capsys.readouterr().out
    assert "ba" in out
    assert "forest_fire" in out


@pytest.mark.parametrize("argv", [["simulate", "--param", "novalue"], ["bogus"]])
def test_bad_arguments_exit_via_argparse(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2


@pytest.mark.parametrize(
    "name,kind",
    [
        ("ba.yaml", "simulate"),
        ("discover_ba.yaml", "discover"),
        ("merger_sweep.yaml", "merger"),
        ("merger_grid.yaml", "merger"),
    ],
)
def test_shipped_configs_validate(repo_data, name, kind):
    from app.core.experiments import load_experiment

    cfg = load_experiment(str(repo_data / name), kind)
    assert cfg.kind == kind
    assert cfg.seed is not None
