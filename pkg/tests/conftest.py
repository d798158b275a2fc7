import copy
import json
import numpy as np
import pytest
from src.controllers.base import MpcConfig, TerminalSet
from src.linalg.base import LinearModel

SERVO_SCENARIO = {
    "name": "test_servo",
    "total_steps": 40,
    "Ts": 0.1,
    "servo": {"k_theta": 1280.2, "rho": 20.0, "J_M": 0.5, "beta_L": 25.0,
              "beta_M": 0.1, "K_T": 10.0, "R_a": 20.0},
    "initial_ratio": 20.0,
    "change_schedule": [],
    "x0": [0.0, 0.0, 0.0, 0.0],
    "noise": {
        "sigma_w": [0.99e-4, 0.99e-4, 0.939e-4, 0.056e-4],
        "sigma_z": {"design": "load-sensitivity", "scale": 1e-4, "floor": 1e-10},
    },
    "filter": {"estimator": "kalman", "p0_scale": 1e-4},
    "trigger": {"alpha": 0.01},
    "mpc": {"Q": [0.01, 0.01, 0.01, 0.01], "R": [1e-5], "horizon": 6, "nu": 1.0},
    "experiment": {"length": 10},
    "policy": "never",
    "seed": 7,
    "eval_step": 20,
}

@pytest.fixture
def rng():
    return np.random.default_rng(1234)

@pytest.fixture
def scenario_dict():
    """Short servo scenario, safe to mutate"""
    return copy.deepcopy(SERVO_SCENARIO)

@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dict to a JSON file and return its path"""
    def _write(data, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path
    return _write

@pytest.fixture
def double_integrator():
    return LinearModel(A=np.array([[1.0, 1.0], [0.0, 1.0]]), B=np.array([[0.0], [1.0]]))

@pytest.fixture
def unconstrained_cfg():
    def _cfg(n, m, N, terminal=TerminalSet.ZERO, nu=0.0):
        return MpcConfig(Q=np.eye(n), R=np.eye(m), Q_N=np.eye(n), N=N, nu=nu, terminal=terminal)
    return _cfg

@pytest.fixture
def random_model():
    """Factory of random stable models with generic B (stabilizable)"""
    def _model(rng, n, m, radius=0.95):
        A = rng.standard_normal((n, n))
        A *= radius / max(1e-9, np.max(np.abs(np.linalg.eigvals(A))))
        B = rng.standard_normal((n, m))
        return LinearModel(A=A, B=B)
    return _model
