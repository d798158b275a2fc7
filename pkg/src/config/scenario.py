"""
Scenario files: a JSON document describing one closed-loop study

Every field is validated; errors name the offending field path
(e.g. `mpc.horizon`, `change_schedule[1].step`) and, where it can be
located, the line in the file.
"""
from dataclasses import dataclass, field
from enum import Enum
import json
import re
from pathlib import Path
from typing import Any, Dict, List, Optional
import numpy as np
from scipy import linalg
from src.simulation.plant import NoiseDistribution
from src.simulation.servo import RATIO_RANGE, ServoParams
from src.utils.logger import get_logger

logger = get_logger(__name__)

class ScenarioError(ValueError):
    """Raised when a scenario file is malformed or violates a rule"""

    def __init__(self, field_path: str, message: str, line: Optional[int] = None):
        self.field = field_path
        self.line = line
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{field_path}{location}: {message}")

class Policy(Enum):
    """Model update policy of a run"""
    ETL = "etl"
    PERMANENT = "permanent"
    NEVER = "never"

class EstimatorKind(Enum):
    KALMAN = "kalman"
    RLS = "rls"

class ExperimentStop(Enum):
    """When a learning experiment ends"""
    FIXED_DURATION = "fixed-duration"
    TRACE_THRESHOLD = "trace-threshold"

class DriftDesign(Enum):
    LOAD_SENSITIVITY = "load-sensitivity"
    DIAGONAL = "diagonal"

@dataclass(frozen=True)
class ChangeEvent:
    """Plant load ratio switches to `ratio` at step `step`"""
    step: int
    ratio: float

@dataclass(frozen=True)
class NoiseSettings:
    """
    Disturbance and drift settings

    Attributes:
        sigma_w: True disturbance covariance
        distribution: Shape of the disturbance draws
        sigma_w_inflation: Factor on sigma_w assumed by the filter and experiment MPC
        drift_design: How sigma_z is built
        drift_scale: Load ratio variance per step (load-sensitivity design)
        drift_floor: Variance added to every parameter (load-sensitivity design)
        drift_diagonal: Explicit diagonal of sigma_z (diagonal design)
        lam: Forgetting factor of the RLS estimator
    """
    sigma_w: np.ndarray
    distribution: NoiseDistribution = NoiseDistribution.GAUSSIAN
    sigma_w_inflation: float = 1.0
    drift_design: DriftDesign = DriftDesign.LOAD_SENSITIVITY
    drift_scale: float = 1e-4
    drift_floor: float = 1e-10
    drift_diagonal: Optional[np.ndarray] = None
    lam: float = 1.0

@dataclass(frozen=True)
class FilterSettings:
    estimator: EstimatorKind = EstimatorKind.KALMAN
    p0_scale: float = 1e-2

@dataclass(frozen=True)
class MpcSettings:
    """
    Controller settings of the servo study

    Attributes:
        Q, R, Q_N: Weights
        horizon: Prediction horizon
        nu: Weight of the predicted covariance trace in experiments
        torsion_limit: Bound on the absolute shaft torque
        input_limit: Bound on the absolute input voltage
        terminal: Terminal set ("zero" or "none")
        rollout_includes_drift: Add sigma_z in the covariance rollout
        max_iter: Iteration cap of the experiment solver
    """
    Q: np.ndarray
    R: np.ndarray
    Q_N: np.ndarray
    horizon: int = 6
    nu: float = 1.0
    torsion_limit: float = 78.5398
    input_limit: float = 220.0
    terminal: str = "zero"
    rollout_includes_drift: bool = True
    max_iter: int = 200

@dataclass(frozen=True)
class ExperimentSettings:
    length: int = 200
    stop: ExperimentStop = ExperimentStop.FIXED_DURATION
    trace_threshold: Optional[float] = None

@dataclass(frozen=True)
class OutputSettings:
    tracked_parameters: Optional[List[int]] = None

@dataclass(frozen=True)
class Scenario:
    """
    Complete description of one closed-loop run

    Attributes:
        name: Scenario label
        total_steps: Number of simulated steps
        Ts: Sampling time (s)
        servo: Servo parameters (J_L is set from the load ratios)
        initial_ratio: Load ratio J_L / J_M at step 0, also the nominal model
        change_schedule: Load ratio switches of the true plant
        x0: Initial plant state
        noise, filter, alpha, mpc, experiment, output: Sub-settings
        policy: Model update policy
        seed: RNG seed
        eval_step: Step at which Monte Carlo false-positive rates are read
    """
    name: str
    total_steps: int
    Ts: float
    servo: ServoParams
    initial_ratio: float
    change_schedule: List[ChangeEvent]
    x0: np.ndarray
    noise: NoiseSettings
    filter: FilterSettings
    alpha: float
    mpc: MpcSettings
    experiment: ExperimentSettings
    output: OutputSettings = field(default_factory=OutputSettings)
    policy: Policy = Policy.ETL
    seed: int = 0
    eval_step: int = 100

    @property
    def n(self) -> int:
        return 4

    @property
    def m(self) -> int:
        return 1

    @property
    def dof(self) -> int:
        return self.n * (self.n + self.m)

def _line_of(text: str, key: str) -> Optional[int]:
    """Line of the first occurrence of a JSON key, if any"""
    if not text:
        return None
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1

class _Reader:
    """Typed access to a JSON object with field-path diagnostics"""

    def __init__(self, data: Dict[str, Any], path: str, text: str):
        if not isinstance(data, dict):
            leaf = re.sub(r"\[\d+\]$", "", path.split(".")[-1])
            raise ScenarioError(path or "<root>", "expected an object", _line_of(text, leaf))
        self.data = data
        self.path = path
        self.text = text

    def where(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def error(self, key: str, message: str) -> ScenarioError:
        leaf = re.sub(r"\[\d+\]$", "", key.split(".")[-1])
        return ScenarioError(self.where(key), message, _line_of(self.text, leaf))

    def child(self, key: str, required: bool = False) -> "_Reader":
        if key not in self.data:
            if required:
                raise self.error(key, "missing section")
            return _Reader({}, self.where(key), self.text)
        value = self.data[key]
        if not isinstance(value, dict):
            raise self.error(key, "expected an object")
        return _Reader(value, self.where(key), self.text)

    def get(self, key: str, default: Any = None, required: bool = False) -> Any:
        if key not in self.data:
            if required:
                raise self.error(key, "missing field")
            return default
        return self.data[key]

    def number(self, key: str, default: Optional[float] = None, required: bool = False,
               positive: bool = False) -> float:
        value = self.get(key, default, required)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            raise self.error(key, f"expected a finite number, got {value!r}")
        if positive and not value > 0:
            raise self.error(key, f"must be positive, got {value}")
        return float(value)

    def integer(self, key: str, default: Optional[int] = None, required: bool = False,
                minimum: Optional[int] = None) -> int:
        value = self.get(key, default, required)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.error(key, f"must be at least {minimum}, got {value}")
        return value

    def choice(self, key: str, enum_type, default):
        value = self.get(key, default.value)
        try:
            return enum_type(value)
        except ValueError:
            allowed = ", ".join(item.value for item in enum_type)
            raise self.error(key, f"must be one of {allowed}, got {value!r}")

    def matrix(self, key: str, size: int, default=None, required: bool = False) -> np.ndarray:
        """Square matrix given in full or as its diagonal"""
        value = self.get(key, default, required)
        try:
            array = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise self.error(key, "expected a list of numbers or a matrix")
        if array.ndim == 1 and array.size == size:
            array = np.diag(array)
        if array.shape != (size, size):
            raise self.error(key, f"expected {size} diagonal entries or a {size}x{size} matrix")
        if not np.all(np.isfinite(array)):
            raise self.error(key, "contains non-finite entries")
        return array

def _parse_servo(reader: _Reader) -> ServoParams:
    defaults = ServoParams()
    values = {}
    for name in ("k_theta", "rho", "J_M", "beta_L", "beta_M", "K_T", "R_a"):
        values[name] = reader.number(name, getattr(defaults, name), positive=True)
    return ServoParams(J_L=defaults.J_L, **values)

def _parse_schedule(reader: _Reader, total_steps: int) -> List[ChangeEvent]:
    raw = reader.get("change_schedule", [])
    if not isinstance(raw, list):
        raise reader.error("change_schedule", "expected a list of {step, ratio} objects")
    events = []
    for index, item in enumerate(raw):
        entry = _Reader(item, f"change_schedule[{index}]", reader.text)
        step = entry.integer("step", required=True, minimum=1)
        ratio = entry.number("ratio", required=True, positive=True)
        if step >= total_steps:
            raise ScenarioError("change_schedule", f"change step {step} is not before total_steps={total_steps}",
                                _line_of(reader.text, "change_schedule"))
        if events and step <= events[-1].step:
            raise ScenarioError("change_schedule", "change steps must be strictly increasing",
                                _line_of(reader.text, "change_schedule"))
        if not RATIO_RANGE[0] <= ratio <= RATIO_RANGE[1]:
            raise entry.error("ratio", f"load ratio must lie in {list(RATIO_RANGE)}, got {ratio}")
        events.append(ChangeEvent(step=step, ratio=ratio))
    return events

def _parse_noise(reader: _Reader, dof: int) -> NoiseSettings:
    sigma_w = reader.matrix("sigma_w", 4, required=True)
    if not np.allclose(sigma_w, sigma_w.T):
        raise reader.error("sigma_w", "must be symmetric")
    try:
        linalg.cholesky(sigma_w, lower=True)
    except linalg.LinAlgError:
        raise reader.error("sigma_w", "must be positive definite")

    inflation = reader.number("sigma_w_inflation", 1.0)
    if inflation < 1.0:
        raise reader.error("sigma_w_inflation", f"must be at least 1, got {inflation}")
    lam = reader.number("lambda", 1.0)
    if not 0.0 < lam <= 1.0:
        raise reader.error("lambda", f"must lie in (0, 1], got {lam}")

    drift = reader.child("sigma_z")
    design = drift.choice("design", DriftDesign, DriftDesign.LOAD_SENSITIVITY)
    diagonal = None
    if design == DriftDesign.DIAGONAL:
        diagonal = np.array(drift.get("diagonal", required=True), dtype=float).reshape(-1)
        if diagonal.size != dof or np.any(diagonal < 0) or not np.all(np.isfinite(diagonal)):
            raise drift.error("diagonal", f"expected {dof} nonnegative entries")
    scale = drift.number("scale", 1e-4)
    if scale < 0:
        raise drift.error("scale", f"must be nonnegative, got {scale}")

    return NoiseSettings(
        sigma_w=sigma_w,
        distribution=reader.choice("distribution", NoiseDistribution, NoiseDistribution.GAUSSIAN),
        sigma_w_inflation=inflation,
        drift_design=design,
        drift_scale=scale,
        drift_floor=drift.number("floor", 1e-10, positive=True),
        drift_diagonal=diagonal,
        lam=lam,
    )

def _parse_mpc(reader: _Reader) -> MpcSettings:
    Q = reader.matrix("Q", 4, [1.0, 1.0, 1.0, 1.0])
    R = reader.matrix("R", 1, [1e-4])
    Q_N = reader.matrix("Q_N", 4, Q)
    for key, W, strict in (("Q", Q, False), ("Q_N", Q_N, False), ("R", R, True)):
        lowest = np.linalg.eigvalsh(0.5 * (W + W.T))[0]
        if not np.allclose(W, W.T) or lowest < -1e-12 or (strict and lowest <= 0):
            raise reader.error(key, "must be symmetric positive " + ("definite" if strict else "semi-definite"))
    terminal = reader.get("terminal", "zero")
    if terminal not in ("zero", "none"):
        raise reader.error("terminal", f"must be 'zero' or 'none', got {terminal!r}")
    nu = reader.number("nu", 1.0)
    if nu < 0:
        raise reader.error("nu", f"must be nonnegative, got {nu}")
    drift = reader.get("rollout_includes_drift", True)
    if not isinstance(drift, bool):
        raise reader.error("rollout_includes_drift", "expected true or false")
    return MpcSettings(
        Q=Q, R=R, Q_N=Q_N,
        horizon=reader.integer("horizon", 6, minimum=1),
        nu=nu,
        torsion_limit=reader.number("torsion_limit", 78.5398, positive=True),
        input_limit=reader.number("input_limit", 220.0, positive=True),
        terminal=terminal,
        rollout_includes_drift=drift,
        max_iter=reader.integer("max_iter", 200, minimum=1),
    )

def _parse_experiment(reader: _Reader) -> ExperimentSettings:
    stop = reader.choice("stop", ExperimentStop, ExperimentStop.FIXED_DURATION)
    threshold = None
    if stop == ExperimentStop.TRACE_THRESHOLD:
        threshold = reader.number("trace_threshold", required=True, positive=True)
    return ExperimentSettings(
        length=reader.integer("length", 200, minimum=1),
        stop=stop,
        trace_threshold=threshold,
    )

def _parse_output(reader: _Reader, dof: int) -> OutputSettings:
    tracked = reader.get("tracked_parameters")
    if tracked is None:
        return OutputSettings()
    if (not isinstance(tracked, list) or not tracked
            or any(isinstance(i, bool) or not isinstance(i, int) or not 0 <= i < dof for i in tracked)):
        raise reader.error("tracked_parameters", f"expected a nonempty list of indices in [0, {dof})")
    return OutputSettings(tracked_parameters=list(tracked))

def parse_scenario(data: Dict[str, Any], text: str = "") -> Scenario:
    """
    Build a validated Scenario from decoded JSON

    Args:
        data: Decoded scenario document
        text: Raw file contents, used to locate errors

    Returns:
        Scenario

    Raises:
        ScenarioError: On the first invalid field
    """
    root = _Reader(data, "", text)
    total_steps = root.integer("total_steps", required=True, minimum=1)
    Ts = root.number("Ts", 0.1, positive=True)
    initial_ratio = root.number("initial_ratio", 20.0, positive=True)
    if not RATIO_RANGE[0] <= initial_ratio <= RATIO_RANGE[1]:
        raise root.error("initial_ratio", f"load ratio must lie in {list(RATIO_RANGE)}, got {initial_ratio}")

    servo = _parse_servo(root.child("servo")).with_load_ratio(initial_ratio)
    dof = 20

    x0 = np.array(root.get("x0", [0.0, 0.0, 0.0, 0.0]), dtype=float).reshape(-1)
    if x0.size != 4 or not np.all(np.isfinite(x0)):
        raise root.error("x0", "expected 4 finite numbers")

    filter_reader = root.child("filter")
    filter_settings = FilterSettings(
        estimator=filter_reader.choice("estimator", EstimatorKind, EstimatorKind.KALMAN),
        p0_scale=filter_reader.number("p0_scale", 1e-2, positive=True),
    )
    alpha = root.child("trigger").number("alpha", 0.01)
    if not 0.0 < alpha < 1.0:
        raise root.child("trigger").error("alpha", f"must lie in (0, 1), got {alpha}")

    policy = root.choice("policy", Policy, Policy.ETL)
    if policy == Policy.ETL and filter_settings.estimator != EstimatorKind.KALMAN:
        raise filter_reader.error("estimator", "the etl policy requires the kalman estimator")

    eval_step = root.integer("eval_step", min(100, total_steps - 1), minimum=0)
    if eval_step >= total_steps:
        raise root.error("eval_step", f"must be below total_steps={total_steps}")

    return Scenario(
        name=str(root.get("name", "scenario")),
        total_steps=total_steps,
        Ts=Ts,
        servo=servo,
        initial_ratio=initial_ratio,
        change_schedule=_parse_schedule(root, total_steps),
        x0=x0,
        noise=_parse_noise(root.child("noise", required=True), dof),
        filter=filter_settings,
        alpha=alpha,
        mpc=_parse_mpc(root.child("mpc")),
        experiment=_parse_experiment(root.child("experiment")),
        output=_parse_output(root.child("output"), dof),
        policy=policy,
        seed=root.integer("seed", 0, minimum=0),
        eval_step=eval_step,
    )

def load_scenario(path) -> Scenario:
    """
    Read and validate a scenario file

    Raises:
        ScenarioError: If the file cannot be read, is not valid JSON or fails validation
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError("<file>", f"cannot read {path}: {str(e)}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("<file>", f"invalid JSON: {e.msg}", e.lineno)
    scenario = parse_scenario(data, text)
    logger.info(
        f"Loaded scenario '{scenario.name}' from {path}: {scenario.total_steps} steps, "
        f"{len(scenario.change_schedule)} load changes, policy {scenario.policy.value}"
    )
    return scenario
