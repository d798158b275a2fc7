"""
Per-step records and events of a closed-loop run
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List
import numpy as np
from src.config.scenario import Policy
from src.controllers.base import SolveStatus

class Mode(Enum):
    CONTROL = "control"
    EXPERIMENT = "experiment"

class EventKind(Enum):
    PLANT_CHANGE = "plant-change"
    TRIGGER = "trigger"
    EXPERIMENT_START = "experiment-start"
    EXPERIMENT_STOP = "experiment-stop"
    MODEL_UPDATE = "model-update"
    SYNTHESIS_REFUSED = "synthesis-refused"
    MPC_FALLBACK = "mpc-fallback"

@dataclass(frozen=True)
class Event:
    step: int
    kind: EventKind
    detail: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"step": self.step, "kind": self.kind.value, **self.detail}

@dataclass(frozen=True)
class StepRecord:
    """
    Everything logged at one step

    Attributes:
        k: Step index
        mode: Mode in which the input was chosen
        x: Measured state x_k
        u: Applied input u_k
        z_true: Parameters of the true plant at step k
        z_model: Parameters of the model used by the controller
        z_hat: Filter estimate z_{k|k}
        P_diag: Diagonal of P_{k|k}
        trace_P: trace(P_{k|k})
        statistic, threshold, fired: Trigger outcome (NaN/False when not evaluated)
        torsion: Shaft torque g x_k
        state_violation: |torsion| above its limit
        input_violation: |u| above its limit
        mpc_status: Status of the solve that produced u_k
    """
    k: int
    mode: Mode
    x: np.ndarray
    u: np.ndarray
    z_true: np.ndarray
    z_model: np.ndarray
    z_hat: np.ndarray
    P_diag: np.ndarray
    trace_P: float
    statistic: float
    threshold: float
    fired: bool
    torsion: float
    state_violation: bool
    input_violation: bool
    mpc_status: SolveStatus

@dataclass
class SimulationLog:
    """
    Per-step records and events of one run

    Attributes:
        scenario: Scenario name
        policy: Update policy of the run
        seed: RNG seed
        change_steps: Steps at which the true plant changed
        records: One StepRecord per simulated step
        events: Trigger, experiment, model update and fallback events
    """
    scenario: str
    policy: Policy
    seed: int
    change_steps: List[int]
    records: List[StepRecord] = field(default_factory=list)
    events: List[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def events_of(self, kind: EventKind) -> List[Event]:
        return [event for event in self.events if event.kind == kind]
