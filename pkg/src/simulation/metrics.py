"""
Run-level metrics: model error, trigger delays, constraint violations
and experiment bookkeeping
"""
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional
import numpy as np
from .records import EventKind, Mode, SimulationLog

@dataclass
class ExperimentSummary:
    start: int
    stop: Optional[int]
    trace_start: float
    trace_stop: Optional[float]

    @property
    def shrank(self) -> bool:
        return self.trace_stop is not None and self.trace_stop < self.trace_start

@dataclass
class MetricsReport:
    """
    Summary of one run

    Attributes:
        policy: Update policy
        seed: RNG seed
        steps: Number of logged steps
        avg_error_whole: Mean squared model error over all steps
        avg_error_excluding: Same, over steps not spent in experiments
        experiment_steps: Steps spent in experiment mode
        trigger_count: Number of fired triggers
        triggers_before_first_change: Fired triggers before the first plant change
        trigger_delays: Per plant change, steps until the next fired trigger (None if none)
        model_updates: Number of adopted models
        state_violations, input_violations: Constraint violations on the true plant
        fallback_steps: Steps where the MPC was infeasible
        experiments: Start/stop and trace(P) of every experiment
        experiment_efficacy: True iff every finished experiment shrank trace(P)
    """
    policy: str
    seed: int
    steps: int
    avg_error_whole: float
    avg_error_excluding: float
    experiment_steps: int
    trigger_count: int
    triggers_before_first_change: int
    trigger_delays: List[Optional[int]]
    model_updates: int
    state_violations: int
    input_violations: int
    fallback_steps: int
    experiments: List[ExperimentSummary] = field(default_factory=list)
    experiment_efficacy: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

def _experiments(log: SimulationLog) -> List[ExperimentSummary]:
    experiments: List[ExperimentSummary] = []
    for event in log.events:
        if event.kind == EventKind.EXPERIMENT_START:
            experiments.append(ExperimentSummary(
                start=event.step, stop=None, trace_start=event.detail["trace_P"], trace_stop=None,
            ))
        elif event.kind == EventKind.EXPERIMENT_STOP and experiments:
            experiments[-1].stop = event.step
            experiments[-1].trace_stop = event.detail["trace_P"]
    return experiments

def compute_metrics(log: SimulationLog) -> MetricsReport:
    """
    Evaluate a complete log

    The squared model error of a step is ||z_model - z_true||^2 / n(n+m).
    The excluding-excitation average drops steps in experiment mode; it is
    NaN if every step was an experiment step.

    Args:
        log: Log of one run

    Returns:
        MetricsReport
    """
    records = log.records
    errors = np.array([np.mean((r.z_model - r.z_true) ** 2) for r in records])
    in_experiment = np.array([r.mode == Mode.EXPERIMENT for r in records], dtype=bool)
    fired_steps = [r.k for r in records if r.fired]

    whole = float(np.mean(errors)) if errors.size else float("nan")
    kept = errors[~in_experiment] if errors.size else errors
    excluding = float(np.mean(kept)) if kept.size else float("nan")

    delays: List[Optional[int]] = []
    for change in log.change_steps:
        later = [k for k in fired_steps if k >= change]
        delays.append(later[0] - change if later else None)
    first_change = log.change_steps[0] if log.change_steps else len(records)

    experiments = _experiments(log)
    finished = [e for e in experiments if e.stop is not None]

    return MetricsReport(
        policy=log.policy.value,
        seed=log.seed,
        steps=len(records),
        avg_error_whole=whole,
        avg_error_excluding=excluding,
        experiment_steps=int(np.sum(in_experiment)),
        trigger_count=len(log.events_of(EventKind.TRIGGER)),
        triggers_before_first_change=sum(1 for k in fired_steps if k < first_change),
        trigger_delays=delays,
        model_updates=len(log.events_of(EventKind.MODEL_UPDATE)),
        state_violations=sum(1 for r in records if r.state_violation),
        input_violations=sum(1 for r in records if r.input_violation),
        fallback_steps=len(log.events_of(EventKind.MPC_FALLBACK)),
        experiments=experiments,
        experiment_efficacy=all(e.shrank for e in finished),
    )
