"""
Nominal and experiment-design model predictive controllers
"""
from .base import (
    BaseMpc,
    ControllerError,
    MpcConfig,
    MpcSolution,
    SolveStatus,
    SynthesisError,
    TerminalSet,
    check_stabilizable,
    constraint_violation,
    controller_update,
)
from .covariance import covariance_rollout
from .experiment import ExperimentMpc, experiment_mpc_solve
from .nominal import NominalMpc, nominal_mpc_solve
