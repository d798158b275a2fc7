"""
Subcommands: single run, policy comparison on paired seeds, and the
false-positive Monte Carlo of the learning trigger
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from functools import wraps
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import numpy as np
from scipy import stats
from src.config.scenario import Policy, Scenario, ScenarioError, load_scenario
from src.simulation.metrics import MetricsReport
from src.simulation.runner import SimulationError, run_scenario, simulate
from src.simulation.servo import most_sensitive_parameters
from src.utils.logger import get_logger
from .outputs import write_json, write_run_outputs

TOOL_VERSION = "1.0.0"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 4

SIGNIFICANCE = 0.05

logger = get_logger(__name__)

@dataclass
class RunManifest:
    """
    What a command ran, written next to its outputs

    Attributes:
        scenario: Scenario file path
        output_dir: Output directory
        seeds: Seeds used (distinct)
        policies: Policies used
        version: Tool version
    """
    scenario: str
    output_dir: str
    seeds: List[int]
    policies: List[str]
    version: str = TOOL_VERSION

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("Seeds must be distinct")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

def exit_codes(command: Callable[..., int]) -> Callable[..., int]:
    """Map scenario errors to exit 2 and runtime failures to exit 3"""
    @wraps(command)
    def wrapper(*args, **kwargs) -> int:
        try:
            return command(*args, **kwargs)
        except ScenarioError as e:
            logger.error(f"Invalid scenario: {str(e)}")
            return EXIT_CONFIG
        except SimulationError as e:
            logger.error(f"Simulation failed at step {e.step}: {str(e)}")
            return EXIT_RUNTIME
        except Exception as e:
            logger.error(f"{command.__name__} failed: {str(e)}")
            return EXIT_RUNTIME
    return wrapper

def prepare_output_dir(out: Path) -> Path:
    """Create the output directory and check that it is writable"""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as e:
        raise RuntimeError(f"Output directory {out} is not writable: {str(e)}")
    return out

def map_runs(fn: Callable, tasks: Sequence, jobs: int = 1) -> List:
    """Apply fn to every task, in order; jobs > 1 uses a process pool"""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))

def tracked_parameters(sc: Scenario) -> List[int]:
    if sc.output.tracked_parameters is not None:
        return list(sc.output.tracked_parameters)
    return most_sensitive_parameters(sc.servo, sc.initial_ratio, sc.Ts)

def _metrics_task(task: Tuple[Scenario, str, int]) -> MetricsReport:
    sc, policy, seed = task
    _, report = run_scenario(replace(sc, policy=Policy(policy), seed=seed))
    return report

def _monitor_task(task: Tuple[Scenario, int]) -> Tuple[bool, bool, float]:
    sc, seed = task
    log = simulate(replace(sc, seed=seed), monitor_trigger=True)
    last = log.records[-1]
    return last.fired, any(r.fired for r in log.records), last.statistic

def mean_stderr(values: Sequence[float]) -> Dict[str, float]:
    data = np.asarray(values, dtype=float)
    data = data[np.isfinite(data)]
    if data.size == 0:
        return {"mean": float("nan"), "stderr": float("nan"), "n": 0}
    stderr = float(np.std(data, ddof=1) / math.sqrt(data.size)) if data.size > 1 else 0.0
    return {"mean": float(np.mean(data)), "stderr": stderr, "n": int(data.size)}

def sign_test(better: Sequence[float], worse: Sequence[float]) -> Dict[str, Any]:
    """
    One-sided paired sign test of better < worse

    Ties are dropped; p-value from the binomial distribution at 1/2.
    """
    pairs = [(a, b) for a, b in zip(better, worse) if np.isfinite(a) and np.isfinite(b) and a != b]
    wins = sum(1 for a, b in pairs if a < b)
    if not pairs:
        return {"wins": 0, "n": 0, "p_value": 1.0, "significant": False}
    p_value = float(stats.binomtest(wins, len(pairs), 0.5, alternative="greater").pvalue)
    return {"wins": wins, "n": len(pairs), "p_value": p_value, "significant": p_value < SIGNIFICANCE}

@exit_codes
def cmd_run(scenario_path, policy: Optional[str] = None, seed: Optional[int] = None,
            out="results") -> int:
    """
    Run one scenario and write log.csv, params.csv, metrics.json, events.json

    Args:
        scenario_path: Scenario JSON file
        policy: Override of the scenario policy
        seed: Override of the scenario seed
        out: Output directory

    Returns:
        Exit code
    """
    sc = load_scenario(scenario_path)
    if policy is not None:
        sc = replace(sc, policy=Policy(policy))
    if seed is not None:
        sc = replace(sc, seed=seed)
    out_dir = prepare_output_dir(out)

    log, metrics = run_scenario(sc)
    write_run_outputs(log, metrics, out_dir, tracked_parameters(sc))
    manifest = RunManifest(str(scenario_path), str(out_dir), [sc.seed], [sc.policy.value])
    write_json(manifest.to_dict(), out_dir / "manifest.json")
    logger.info(
        f"Run complete: whole-run error {metrics.avg_error_whole:.4e}, "
        f"excluding experiments {metrics.avg_error_excluding:.4e}"
    )
    return EXIT_OK

@exit_codes
def cmd_compare(scenario_path, seeds: int = 20, out="results", jobs: int = 1) -> int:
    """
    Run all three policies on paired seeds and write table1.json

    Returns:
        Exit code
    """
    if seeds < 1:
        raise ValueError(f"Number of seeds must be positive, got {seeds}")
    sc = load_scenario(scenario_path)
    out_dir = prepare_output_dir(out)
    seed_list = [sc.seed + i for i in range(seeds)]
    policies = [p.value for p in Policy]

    tasks = [(sc, policy, seed) for policy in policies for seed in seed_list]
    logger.info(f"Comparing {len(policies)} policies on {seeds} seeds ({len(tasks)} runs, {jobs} jobs)")
    reports = map_runs(_metrics_task, tasks, jobs)
    by_policy: Dict[str, List[MetricsReport]] = {p: [] for p in policies}
    for report in sorted(reports, key=lambda r: (r.policy, r.seed)):
        by_policy[report.policy].append(report)

    whole = {p: [r.avg_error_whole for r in by_policy[p]] for p in policies}
    excluding = {p: [r.avg_error_excluding for r in by_policy[p]] for p in policies}
    table = {
        "scenario": sc.name,
        "seeds": seed_list,
        "average_squared_parameter_error": {
            "whole_run": {p: mean_stderr(whole[p]) for p in policies},
            "excluding_excitation": {p: mean_stderr(excluding[p]) for p in policies},
        },
        "sign_tests": {
            "excluding_excitation": {
                "etl<permanent": sign_test(excluding["etl"], excluding["permanent"]),
                "etl<never": sign_test(excluding["etl"], excluding["never"]),
            },
            "whole_run": {
                "permanent<never": sign_test(whole["permanent"], whole["never"]),
                "etl<never": sign_test(whole["etl"], whole["never"]),
            },
        },
        "runs": [
            {"policy": r.policy, "seed": r.seed, "whole_run": r.avg_error_whole,
             "excluding_excitation": r.avg_error_excluding, "triggers": r.trigger_count,
             "experiment_efficacy": r.experiment_efficacy}
            for p in policies for r in by_policy[p]
        ],
    }
    means = {p: table["average_squared_parameter_error"]["whole_run"][p]["mean"] for p in policies}
    table["never_worst_whole_run"] = bool(all(means["never"] >= means[p] for p in policies))

    write_json(table, out_dir / "table1.json")
    write_json(RunManifest(str(scenario_path), str(out_dir), seed_list, policies).to_dict(),
               out_dir / "manifest.json")
    return EXIT_OK

@exit_codes
def cmd_montecarlo(scenario_path, runs: int = 5000, alpha: Optional[float] = None,
                   out="results", jobs: int = 1, eval_step: Optional[int] = None) -> int:
    """
    Estimate the per-step false-positive rate of the trigger with a perfect model

    Every run keeps the nominal model (which equals the plant) and evaluates
    the trigger without acting on it; the rate is read at eval_step.

    Returns:
        Exit code
    """
    if runs < 1:
        raise ValueError(f"Number of runs must be positive, got {runs}")
    sc = load_scenario(scenario_path)
    if sc.change_schedule:
        raise ScenarioError("change_schedule", "the false-positive study requires a scenario without load changes")
    if alpha is not None:
        if not 0.0 < alpha < 1.0:
            raise ScenarioError("trigger.alpha", f"must lie in (0, 1), got {alpha}")
        sc = replace(sc, alpha=alpha)
    step = sc.eval_step if eval_step is None else eval_step
    if not 0 <= step < sc.total_steps:
        raise ScenarioError("eval_step", f"must lie in [0, {sc.total_steps}), got {step}")
    sc = replace(sc, policy=Policy.NEVER, total_steps=step + 1)
    out_dir = prepare_output_dir(out)

    seeds = [sc.seed + i for i in range(runs)]
    logger.info(f"False-positive Monte Carlo: {runs} runs, alpha={sc.alpha}, eval step {step}")
    outcomes = map_runs(_monitor_task, [(sc, seed) for seed in seeds], jobs)

    fired = sum(1 for at_step, _, _ in outcomes if at_step)
    any_fired = sum(1 for _, anywhere, _ in outcomes if anywhere)
    rate = fired / runs
    interval = stats.binomtest(fired, runs).proportion_ci(confidence_level=0.95, method="exact")
    bound = sc.alpha + 3.0 * math.sqrt(sc.alpha * (1.0 - sc.alpha) / runs)
    report = {
        "scenario": sc.name,
        "alpha": sc.alpha,
        "runs": runs,
        "eval_step": step,
        "fired": fired,
        "rate": rate,
        "ci95": [float(interval.low), float(interval.high)],
        "bound": bound,
        "within_bound": rate <= bound,
        "any_trigger_fraction": any_fired / runs,
        "mean_statistic": float(np.mean([s for _, _, s in outcomes])),
        "distribution": sc.noise.distribution.value,
    }
    write_json(report, out_dir / "fpr.json")
    write_json(RunManifest(str(scenario_path), str(out_dir), seeds, [Policy.NEVER.value]).to_dict(),
               out_dir / "manifest.json")
    logger.info(f"Per-step trigger rate {rate:.4f} (bound {bound:.4f}), runs with any trigger {any_fired / runs:.4f}")
    return EXIT_OK
