"""Full-length servo studies; run with `pytest -m slow` (ETL_JOBS sets the worker count)"""
import json
from pathlib import Path
import pytest
from main import main
from src.cli.commands import _metrics_task, map_runs, sign_test
from src.config.config import load_config
from src.config.scenario import Policy, load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
DETECTION_SEEDS = 50
PAIRED_SEEDS = 20

pytestmark = pytest.mark.slow

def _reports(policy: Policy, seeds: int):
    sc = load_scenario(SCENARIOS / "servo_etl.json")
    tasks = [(sc, policy.value, sc.seed + i) for i in range(seeds)]
    return map_runs(_metrics_task, tasks, load_config().run.jobs)

@pytest.fixture(scope="module")
def etl_reports():
    return _reports(Policy.ETL, DETECTION_SEEDS)

@pytest.fixture(scope="module")
def baseline_reports():
    return {policy: _reports(policy, PAIRED_SEEDS) for policy in (Policy.PERMANENT, Policy.NEVER)}

@pytest.mark.parametrize("alpha", [0.01, 0.05])
def test_false_positive_rate_respects_level(tmp_path, alpha):
    out = tmp_path / "mc"
    argv = ["--log-file", str(tmp_path / "etl.log"), "--log-level", "WARNING",
            "montecarlo", str(SCENARIOS / "servo_no_change.json"),
            "--runs", "5000", "--alpha", str(alpha), "--out", str(out)]
    assert main(argv) == 0
    report = json.loads((out / "fpr.json").read_text(encoding="utf-8"))
    assert report["runs"] == 5000
    assert report["within_bound"]

def test_every_experiment_shrinks_uncertainty(etl_reports):
    for report in etl_reports:
        assert report.experiments, f"seed {report.seed}: no experiment"
        assert report.experiment_efficacy, f"seed {report.seed}: {report.experiments}"

def test_changes_detected_quickly(etl_reports):
    for change in range(2):
        quick = [r for r in etl_reports
                 if r.trigger_delays[change] is not None and r.trigger_delays[change] < 300]
        assert len(quick) >= 0.9 * DETECTION_SEEDS

def test_no_triggers_before_first_change(etl_reports):
    quiet = [r for r in etl_reports if r.triggers_before_first_change == 0]
    assert len(quiet) >= 0.95 * DETECTION_SEEDS

def test_policy_ordering_on_paired_seeds(etl_reports, baseline_reports):
    etl = etl_reports[:PAIRED_SEEDS]
    permanent, never = baseline_reports[Policy.PERMANENT], baseline_reports[Policy.NEVER]
    assert [r.seed for r in etl] == [r.seed for r in permanent] == [r.seed for r in never]

    def excluding(reports):
        return [r.avg_error_excluding for r in reports]

    assert sign_test(excluding(etl), excluding(permanent))["significant"]
    assert sign_test(excluding(etl), excluding(never))["significant"]

    whole = {name: sum(r.avg_error_whole for r in reports) / PAIRED_SEEDS
             for name, reports in (("etl", etl), ("permanent", permanent), ("never", never))}
    assert whole["never"] > whole["etl"]
    assert whole["never"] > whole["permanent"]
