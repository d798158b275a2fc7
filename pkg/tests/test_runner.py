from dataclasses import replace
import numpy as np
import pytest
from src.config.scenario import Policy, parse_scenario
from src.controllers.base import SolveStatus
from src.linalg.statistics import chi2_quantile
from src.simulation.metrics import compute_metrics
from src.simulation.records import EventKind, Mode, SimulationLog, StepRecord
from src.simulation.runner import ClosedLoop, build_filter_noise, build_mpc_config, run_scenario, simulate
from src.trigger.learning_trigger import TriggerDecision

class ScriptedTrigger:
    """Fires once, when the filter has seen `fire_after` updates"""

    def __init__(self, fire_after: int):
        self.fire_after = fire_after
        self.rebound = []

    def evaluate(self, state):
        fired = state.step == self.fire_after
        return TriggerDecision(fired=fired, statistic=100.0 if fired else 1.0, threshold=37.566)

    def rebind(self, z_star):
        self.rebound.append(z_star)

def _record(k, mode, error):
    z_true = np.zeros(4)
    return StepRecord(
        k=k, mode=mode, x=np.zeros(4), u=np.zeros(1), z_true=z_true,
        z_model=z_true + np.sqrt(error), z_hat=z_true, P_diag=np.ones(4), trace_P=4.0,
        statistic=float("nan"), threshold=float("nan"), fired=False, torsion=0.0,
        state_violation=False, input_violation=False, mpc_status=SolveStatus.SOLVED,
    )

def test_never_policy_without_changes(scenario_dict):
    log, metrics = run_scenario(parse_scenario(scenario_dict))
    assert len(log) == 40
    assert [r.k for r in log.records] == list(range(40))
    assert metrics.trigger_count == 0
    assert metrics.avg_error_whole == 0.0
    assert metrics.avg_error_excluding == 0.0
    assert metrics.model_updates == 0
    assert all(r.mode == Mode.CONTROL for r in log.records)
    assert all(np.isnan(r.statistic) for r in log.records)

def test_runs_are_deterministic(scenario_dict):
    sc = parse_scenario(scenario_dict)
    first, second = simulate(sc), simulate(sc)
    for a, b in zip(first.records, second.records):
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.u, b.u)
        np.testing.assert_array_equal(a.z_hat, b.z_hat)
        assert a.trace_P == b.trace_P

def test_seed_changes_the_run(scenario_dict):
    first = simulate(parse_scenario(scenario_dict))
    scenario_dict["seed"] = 8
    second = simulate(parse_scenario(scenario_dict))
    assert not np.array_equal(first.records[-1].x, second.records[-1].x)

def test_monitor_mode_logs_the_statistic(scenario_dict):
    log = simulate(parse_scenario(scenario_dict), monitor_trigger=True)
    threshold = chi2_quantile(0.99, 20)
    assert all(np.isfinite(r.statistic) for r in log.records)
    assert all(r.threshold == pytest.approx(threshold) for r in log.records)
    assert log.records[0].statistic == 0.0
    assert not log.events_of(EventKind.TRIGGER)

def test_plant_change_is_logged(scenario_dict):
    scenario_dict["change_schedule"] = [{"step": 10, "ratio": 30.0}]
    log, metrics = run_scenario(parse_scenario(scenario_dict))
    changes = log.events_of(EventKind.PLANT_CHANGE)
    assert [e.step for e in changes] == [10]
    assert np.all([np.array_equal(r.z_true, log.records[0].z_true) for r in log.records[:10]])
    assert not np.array_equal(log.records[10].z_true, log.records[0].z_true)
    assert metrics.avg_error_whole > 0.0
    assert metrics.trigger_delays == [None]

def test_permanent_policy_adopts_every_estimate(scenario_dict):
    scenario_dict["policy"] = "permanent"
    log, metrics = run_scenario(parse_scenario(scenario_dict))
    if not log.events_of(EventKind.SYNTHESIS_REFUSED):
        for r in log.records[1:]:
            np.testing.assert_array_equal(r.z_model, r.z_hat)
    assert metrics.trigger_count == 0
    assert metrics.experiment_steps == 0

def test_permanent_policy_with_rls(scenario_dict):
    scenario_dict["policy"] = "permanent"
    scenario_dict["filter"]["estimator"] = "rls"
    scenario_dict["noise"]["lambda"] = 0.995
    log, _ = run_scenario(parse_scenario(scenario_dict))
    assert len(log) == 40

def test_etl_mode_machine(scenario_dict):
    """Trigger at step 3, experiment for 4 steps, model update at step 8"""
    scenario_dict["policy"] = "etl"
    scenario_dict["total_steps"] = 12
    scenario_dict["eval_step"] = 5
    scenario_dict["experiment"] = {"length": 4}
    scenario_dict["mpc"]["max_iter"] = 20
    loop = ClosedLoop(parse_scenario(scenario_dict))
    trigger = ScriptedTrigger(fire_after=3)
    loop.trigger = trigger
    log = loop.run()

    modes = [r.mode for r in log.records]
    assert modes == [Mode.CONTROL] * 4 + [Mode.EXPERIMENT] * 4 + [Mode.CONTROL] * 4
    assert [e.step for e in log.events_of(EventKind.TRIGGER)] == [3]
    assert [e.step for e in log.events_of(EventKind.EXPERIMENT_START)] == [3]
    assert [e.step for e in log.events_of(EventKind.EXPERIMENT_STOP)] == [8]
    updates = log.events_of(EventKind.MODEL_UPDATE) + log.events_of(EventKind.SYNTHESIS_REFUSED)
    assert [e.step for e in updates] == [8]
    if log.events_of(EventKind.MODEL_UPDATE):
        assert len(trigger.rebound) == 1
        np.testing.assert_array_equal(log.records[8].z_model, log.records[8].z_hat)
        np.testing.assert_array_equal(log.records[7].z_model, log.records[0].z_model)

    metrics = compute_metrics(log)
    assert metrics.experiment_steps == 4
    assert metrics.trigger_count == 1
    assert len(metrics.experiments) == 1
    assert metrics.experiments[0].start == 3 and metrics.experiments[0].stop == 8

def test_experiment_modes_follow_triggers(scenario_dict):
    """Every experiment run starts right after a fired trigger and ends with a stop event"""
    scenario_dict["policy"] = "etl"
    scenario_dict["total_steps"] = 15
    scenario_dict["eval_step"] = 5
    scenario_dict["experiment"] = {"length": 3}
    scenario_dict["mpc"]["max_iter"] = 20
    loop = ClosedLoop(parse_scenario(scenario_dict))
    loop.trigger = ScriptedTrigger(fire_after=2)
    log = loop.run()
    fired = {e.step for e in log.events_of(EventKind.TRIGGER)}
    stops = {e.step for e in log.events_of(EventKind.EXPERIMENT_STOP)}
    records = log.records
    for previous, current in zip(records, records[1:]):
        if current.mode == Mode.EXPERIMENT and previous.mode == Mode.CONTROL:
            assert previous.k in fired
        if current.mode == Mode.CONTROL and previous.mode == Mode.EXPERIMENT:
            assert current.k in stops

def test_metrics_on_constructed_log():
    log = SimulationLog(scenario="constructed", policy=Policy.ETL, seed=0, change_steps=[1])
    log.records = [
        _record(0, Mode.CONTROL, 0.0),
        _record(1, Mode.CONTROL, 0.0),
        _record(2, Mode.EXPERIMENT, 4.0),
        _record(3, Mode.EXPERIMENT, 4.0),
    ]
    metrics = compute_metrics(log)
    assert metrics.avg_error_whole == pytest.approx(2.0)
    assert metrics.avg_error_excluding == pytest.approx(0.0)
    assert metrics.experiment_steps == 2
    assert metrics.trigger_delays == [None]

def test_trigger_delay_counts_from_the_change():
    log = SimulationLog(scenario="constructed", policy=Policy.ETL, seed=0, change_steps=[1, 3])
    records = [_record(k, Mode.CONTROL, 0.0) for k in range(6)]
    records[0] = replace(records[0], fired=True)
    records[2] = replace(records[2], fired=True)
    log.records = records
    metrics = compute_metrics(log)
    assert metrics.trigger_delays == [1, None]
    assert metrics.triggers_before_first_change == 1

def test_builders(scenario_dict):
    sc = parse_scenario(scenario_dict)
    cfg = build_mpc_config(sc)
    assert cfg.N == 6 and cfg.nu == 1.0
    assert cfg.G.shape == (2, 4)
    assert cfg.has_inequalities
    assert build_mpc_config(sc, nu=0.0).nu == 0.0
    noise = build_filter_noise(sc)
    assert noise.sigma_z.shape == (20, 20)
    np.testing.assert_array_equal(noise.sigma_w, sc.noise.sigma_w)

def test_filter_noise_inflation(scenario_dict):
    scenario_dict["noise"]["sigma_w_inflation"] = 2.5
    sc = parse_scenario(scenario_dict)
    noise = build_filter_noise(sc)
    np.testing.assert_allclose(noise.sigma_w, 2.5 * sc.noise.sigma_w)
    baseline = build_filter_noise(replace(sc, noise=replace(sc.noise, sigma_w_inflation=1.0)))
    np.testing.assert_array_equal(noise.sigma_z, baseline.sigma_z)
