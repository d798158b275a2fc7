import json
import pandas as pd
import pytest
from main import build_parser, main
from src.cli.commands import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, RunManifest, map_runs, mean_stderr, sign_test
from src.cli.outputs import LOG_COLUMNS, PARAM_COLUMNS, to_jsonable
from src.config.config import load_config
from src.utils.logger import get_log_level

@pytest.fixture
def log_args(tmp_path):
    return ["--log-file", str(tmp_path / "logs" / "etl.log"), "--log-level", "WARNING"]

def test_missing_arguments_exit_with_usage_code(log_args):
    with pytest.raises(SystemExit) as info:
        main(log_args + ["run"])
    assert info.value.code == EXIT_USAGE

@pytest.mark.parametrize("argv", [
    ["montecarlo", "s.json", "--runs", "0"],
    ["montecarlo", "s.json", "--alpha", "1.5"],
    ["compare", "s.json", "--seeds", "-1"],
    ["run", "s.json", "--policy", "sometimes"],
    ["explain"],
])
def test_bad_arguments(argv):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(argv)
    assert info.value.code == EXIT_USAGE

def test_bad_log_level(tmp_path, write_scenario, scenario_dict):
    path = write_scenario(scenario_dict)
    argv = ["--log-file", str(tmp_path / "etl.log"), "--log-level", "LOUD", "run", str(path)]
    assert main(argv) == EXIT_USAGE

def test_invalid_scenario_names_the_field(tmp_path, log_args, write_scenario, scenario_dict, capsys):
    scenario_dict["change_schedule"] = [{"step": 30, "ratio": 22.0}, {"step": 20, "ratio": 19.0}]
    path = write_scenario(scenario_dict)
    code = main(log_args[:2] + ["run", str(path), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "change_schedule" in capsys.readouterr().out

def test_run_writes_outputs(tmp_path, log_args, write_scenario, scenario_dict):
    path = write_scenario(scenario_dict)
    out = tmp_path / "run"
    assert main(log_args + ["run", str(path), "--out", str(out)]) == EXIT_OK

    log = pd.read_csv(out / "log.csv")
    assert list(log.columns) == LOG_COLUMNS
    assert len(log) == 40
    assert (log["mode"] == "control").all()

    params = pd.read_csv(out / "params.csv")
    assert list(params.columns) == PARAM_COLUMNS
    assert len(params) == 40 * 4

    metrics = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
    assert metrics["policy"] == "never"
    assert metrics["avg_error_whole"] == 0.0
    assert metrics["steps"] == 40
    events = json.loads((out / "events.json").read_text(encoding="utf-8"))
    assert not [e for e in events if e["kind"] == "trigger"]
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seeds"] == [7]
    assert manifest["policies"] == ["never"]

def test_run_overrides_and_is_reproducible(tmp_path, log_args, write_scenario, scenario_dict):
    scenario_dict["output"] = {"tracked_parameters": [0, 5]}
    path = write_scenario(scenario_dict)
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert main(log_args + ["run", str(path), "--seed", "3", "--policy", "permanent", "--out", str(out)]) == EXIT_OK
    assert (first / "log.csv").read_bytes() == (second / "log.csv").read_bytes()
    assert (first / "params.csv").read_bytes() == (second / "params.csv").read_bytes()
    assert len(pd.read_csv(first / "params.csv")) == 40 * 2
    manifest = json.loads((first / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seeds"] == [3]
    assert manifest["policies"] == ["permanent"]

def test_montecarlo_writes_rates(tmp_path, log_args, write_scenario, scenario_dict):
    path = write_scenario(scenario_dict)
    out = tmp_path / "mc"
    argv = log_args + ["montecarlo", str(path), "--runs", "3", "--eval-step", "5", "--alpha", "0.05", "--out", str(out)]
    assert main(argv) == EXIT_OK
    report = json.loads((out / "fpr.json").read_text(encoding="utf-8"))
    assert report["runs"] == 3
    assert report["eval_step"] == 5
    assert report["alpha"] == 0.05
    assert 0 <= report["fired"] <= 3
    assert report["rate"] == report["fired"] / 3
    low, high = report["ci95"]
    assert 0.0 <= low <= report["rate"] <= high <= 1.0
    assert report["bound"] > 0.05
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seeds"] == [7, 8, 9]

def test_montecarlo_rejects_load_changes(tmp_path, log_args, write_scenario, scenario_dict):
    scenario_dict["change_schedule"] = [{"step": 10, "ratio": 22.0}]
    path = write_scenario(scenario_dict)
    assert main(log_args + ["montecarlo", str(path), "--runs", "2", "--out", str(tmp_path / "mc")]) == EXIT_CONFIG

def test_compare_writes_table(tmp_path, log_args, write_scenario, scenario_dict):
    scenario_dict["total_steps"] = 15
    scenario_dict["eval_step"] = 5
    scenario_dict["experiment"] = {"length": 3}
    scenario_dict["mpc"]["max_iter"] = 20
    path = write_scenario(scenario_dict)
    out = tmp_path / "compare"
    assert main(log_args + ["compare", str(path), "--seeds", "2", "--out", str(out)]) == EXIT_OK
    table = json.loads((out / "table1.json").read_text(encoding="utf-8"))
    for window in ("whole_run", "excluding_excitation"):
        cells = table["average_squared_parameter_error"][window]
        assert set(cells) == {"etl", "permanent", "never"}
        assert cells["never"]["n"] == 2
        assert cells["never"]["mean"] == 0.0
    assert len(table["runs"]) == 6
    assert table["seeds"] == [7, 8]
    assert "etl<never" in table["sign_tests"]["excluding_excitation"]

def test_sign_test():
    result = sign_test([1.0] * 10, [2.0] * 10)
    assert result["wins"] == 10
    assert result["p_value"] == pytest.approx(0.5 ** 10)
    assert result["significant"]
    assert sign_test([1.0, 2.0], [1.0, 2.0])["n"] == 0

def test_mean_stderr_drops_missing_values():
    summary = mean_stderr([1.0, 3.0, float("nan")])
    assert summary["mean"] == pytest.approx(2.0)
    assert summary["n"] == 2
    assert summary["stderr"] == pytest.approx(1.0)

def test_map_runs_keeps_order():
    assert map_runs(abs, [-3, 2, -1], jobs=1) == [3, 2, 1]

def test_manifest_rejects_repeated_seeds():
    with pytest.raises(ValueError):
        RunManifest("s.json", "out", [1, 1], ["etl"])

def test_to_jsonable_maps_nan_to_null():
    assert to_jsonable({"a": float("nan"), "b": [1, 2.5]}) == {"a": None, "b": [1, 2.5]}

def test_config_from_environment(monkeypatch):
    monkeypatch.setenv("ETL_JOBS", "3")
    monkeypatch.setenv("ETL_OUTPUT_DIR", "elsewhere")
    config = load_config()
    assert config.run.jobs == 3
    assert config.run.output_dir == "elsewhere"
    monkeypatch.setenv("ETL_JOBS", "0")
    with pytest.raises(ValueError):
        load_config()

def test_log_levels():
    assert get_log_level("debug") == 10
    with pytest.raises(ValueError):
        get_log_level("LOUD")
