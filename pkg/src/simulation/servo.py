"""
DC servomechanism with elastic shaft and switchable load inertia

States: load angle, load angular velocity, motor angle, motor angular
velocity. Input: armature voltage.
"""
from dataclasses import asdict, dataclass, replace
import numpy as np
from src.linalg.base import ContinuousModel, LinearModel, ParamVector
from src.linalg.discretization import zoh_discretize
from src.linalg.vectorization import model_to_params

RATIO_RANGE = (10.0, 30.0)

@dataclass(frozen=True)
class ServoParams:
    """
    Physical parameters of the servo

    Attributes:
        k_theta: Torsional rigidity (Nm/rad)
        rho: Gear ratio
        J_L: Load inertia (kg m^2)
        J_M: Motor inertia (kg m^2)
        beta_L: Load viscous friction (Nms/rad)
        beta_M: Motor viscous friction (Nms/rad)
        K_T: Motor constant (Nm/A)
        R_a: Armature resistance (Ohm)
    """
    k_theta: float = 1280.2
    rho: float = 20.0
    J_L: float = 10.0
    J_M: float = 0.5
    beta_L: float = 25.0
    beta_M: float = 0.1
    K_T: float = 10.0
    R_a: float = 20.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"Servo parameter {name} must be positive, got {value}")

    @property
    def load_ratio(self) -> float:
        return self.J_L / self.J_M

    def with_load_ratio(self, ratio: float) -> "ServoParams":
        return replace(self, J_L=ratio * self.J_M)

    def torsion_row(self) -> np.ndarray:
        """Row g with g x the shaft torsional torque"""
        return np.array([self.k_theta, 0.0, -self.k_theta / self.rho, 0.0])

def servo_continuous(p: ServoParams) -> ContinuousModel:
    """Continuous-time state-space matrices of the servo"""
    A_c = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-p.k_theta / p.J_L, -p.beta_L / p.J_L, p.k_theta / (p.rho * p.J_L), 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [p.k_theta / (p.rho * p.J_M), 0.0, -p.k_theta / (p.rho ** 2 * p.J_M),
         -(p.beta_M * p.R_a + p.K_T ** 2) / (p.J_M * p.R_a)],
    ])
    B_c = np.array([[0.0], [0.0], [0.0], [p.K_T / (p.R_a * p.J_M)]])
    return ContinuousModel(A_c=A_c, B_c=B_c)

def servo_model(p: ServoParams, ratio: float, Ts: float) -> LinearModel:
    """ZOH-discretized servo with J_L = ratio * J_M"""
    return zoh_discretize(servo_continuous(p.with_load_ratio(ratio)), Ts)

def servo_params_vector(p: ServoParams, ratio: float, Ts: float) -> ParamVector:
    return model_to_params(servo_model(p, ratio, Ts))

def load_sensitivity(p: ServoParams, ratio: float, Ts: float, step: float = 1e-3) -> np.ndarray:
    """Central-difference derivative of z with respect to the load ratio"""
    upper = servo_params_vector(p, ratio + step, Ts).z
    lower = servo_params_vector(p, ratio - step, Ts).z
    return (upper - lower) / (2.0 * step)

def servo_drift_covariance(p: ServoParams, ratio: float, Ts: float,
                           scale: float, floor: float) -> np.ndarray:
    """
    Diagonal parameter drift covariance from prior knowledge of load changes

    Parameters that move with the load inertia get variance
    scale * (dz/dratio)^2; every parameter gets at least floor.

    Args:
        p: Servo parameters
        ratio: Nominal load ratio J_L / J_M
        Ts: Sampling time
        scale: Variance of the load ratio drift per step
        floor: Variance assigned to every parameter

    Returns:
        np.ndarray: n(n+m) x n(n+m) diagonal covariance

    Raises:
        ValueError: If scale is negative or floor is not positive
    """
    if scale < 0:
        raise ValueError(f"Drift scale must be nonnegative, got {scale}")
    if not floor > 0:
        raise ValueError(f"Drift floor must be positive, got {floor}")
    sensitivity = load_sensitivity(p, ratio, Ts)
    return np.diag(scale * sensitivity ** 2 + floor)

def most_sensitive_parameters(p: ServoParams, ratio: float, Ts: float, count: int = 4) -> list:
    """Indices of the parameters with the largest load sensitivity, ascending"""
    sensitivity = np.abs(load_sensitivity(p, ratio, Ts))
    top = np.argsort(-sensitivity, kind="stable")[:count]
    return sorted(int(i) for i in top)
