"""
Shared state, noise settings and base class for the parameter estimators
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
import numpy as np
from src.linalg.base import DimensionError, ParamVector, Regressor, as_matrix
from src.linalg.excitation import PSD_SLACK
from src.utils.logger import get_logger

SYMMETRY_TOL = 1e-10

class EstimatorError(Exception):
    """Base exception for estimator errors"""
    pass

class NotPersistentlyExcitingError(EstimatorError):
    """Raised when the data does not determine every parameter"""

    def __init__(self, rank: int, required: int):
        self.rank = rank
        self.required = required
        super().__init__(
            f"Data is not persistently exciting: regressor rank {rank} < {required}"
        )

class DegenerateNoiseError(EstimatorError):
    """Raised when the innovation covariance cannot be factorized"""
    pass

def is_psd(matrix: np.ndarray, slack: float = PSD_SLACK) -> bool:
    """Check symmetry within 1e-10 and nonnegative spectrum within slack"""
    if matrix.size == 0:
        return True
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=SYMMETRY_TOL):
        return False
    return bool(np.linalg.eigvalsh(matrix)[0] >= -slack)

def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return (M + M^T) / 2"""
    return 0.5 * (matrix + matrix.T)

@dataclass(frozen=True)
class FilterState:
    """
    Parameter estimate with its error covariance

    Attributes:
        z_hat: Current estimate
        P: Error covariance, n(n+m) x n(n+m)
        step: Number of updates applied
    """
    z_hat: ParamVector
    P: np.ndarray
    step: int = 0

    def __post_init__(self):
        P = as_matrix(self.P, "P")
        dof = self.z_hat.dof
        if P.shape != (dof, dof):
            raise DimensionError(f"P must have shape {(dof, dof)}, got {P.shape}")
        if self.step < 0:
            raise ValueError(f"step must be nonnegative, got {self.step}")
        object.__setattr__(self, "P", P)

    @classmethod
    def initial(cls, z0: ParamVector, p0_scale: float) -> "FilterState":
        """Start from z0 with covariance p0_scale * I"""
        if not p0_scale > 0:
            raise ValueError(f"Initial covariance scale must be positive, got {p0_scale}")
        return cls(z_hat=z0, P=p0_scale * np.eye(z0.dof), step=0)

    @property
    def trace(self) -> float:
        return float(np.trace(self.P))

    def is_valid(self) -> bool:
        """Covariance symmetric and positive semi-definite within tolerance"""
        return is_psd(self.P)

    def advance(self, z: np.ndarray, P: np.ndarray) -> "FilterState":
        """New state one step later"""
        z_hat = ParamVector(z=z, n=self.z_hat.n, m=self.z_hat.m)
        return replace(self, z_hat=z_hat, P=P, step=self.step + 1)

@dataclass(frozen=True)
class NoiseConfig:
    """
    Noise assumptions of the parameter filter

    Attributes:
        sigma_w: n x n process disturbance covariance
        sigma_z: n(n+m) x n(n+m) parameter drift covariance
        lam: Forgetting factor in (0, 1] for least squares variants
    """
    sigma_w: np.ndarray
    sigma_z: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        sigma_w = as_matrix(self.sigma_w, "sigma_w")
        sigma_z = as_matrix(self.sigma_z, "sigma_z")
        if not is_psd(sigma_w):
            raise ValueError("sigma_w must be symmetric positive semi-definite")
        if not is_psd(sigma_z):
            raise ValueError("sigma_z must be symmetric positive semi-definite")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"Forgetting factor must lie in (0, 1], got {self.lam}")
        object.__setattr__(self, "sigma_w", sigma_w)
        object.__setattr__(self, "sigma_z", sigma_z)

    @property
    def dof(self) -> int:
        return self.sigma_z.shape[0]

    def inflated(self, factor: float) -> "NoiseConfig":
        """Copy with sigma_w scaled by factor (robustness margin)"""
        if not factor > 0:
            raise ValueError(f"Inflation factor must be positive, got {factor}")
        return replace(self, sigma_w=factor * self.sigma_w)

@dataclass(frozen=True)
class KfStepTrace:
    """Intermediate quantities of one Kalman parameter filter step"""
    e: np.ndarray
    S: np.ndarray
    K: np.ndarray
    P_pred: np.ndarray

def estimate_error_sq(z_hat: ParamVector, z_true: ParamVector) -> float:
    """
    Average squared parameter error ||z_hat - z_true||^2 / n(n+m)

    Raises:
        DimensionError: If the vectors have different lengths
    """
    if z_hat.dof != z_true.dof:
        raise DimensionError(f"Length mismatch: {z_hat.dof} vs {z_true.dof}")
    diff = z_hat.z - z_true.z
    return float(diff @ diff) / diff.size

def check_step_inputs(state: FilterState, x_next, C) -> tuple:
    """Validate and unpack the data of one filter step"""
    C_matrix = C.C if isinstance(C, Regressor) else as_matrix(C, "C")
    x_next = np.asarray(x_next, dtype=float).reshape(-1)
    if C_matrix.shape != (state.z_hat.n, state.z_hat.dof):
        raise DimensionError(
            f"Regressor must have shape {(state.z_hat.n, state.z_hat.dof)}, got {C_matrix.shape}"
        )
    if x_next.size != state.z_hat.n:
        raise DimensionError(f"x_next must have length {state.z_hat.n}, got {x_next.size}")
    return x_next, C_matrix

class BaseEstimator(ABC):
    """
    Base class for recursive parameter estimators

    Attributes:
        state: Current FilterState
        logger: Module logger
    """

    def __init__(self, state: FilterState):
        self.state = state
        self.logger = get_logger(self.__class__.__name__)
        self.logger.debug(
            f"Initialized {self.__class__.__name__} with {state.z_hat.dof} parameters"
        )

    @abstractmethod
    def update(self, x_next, C) -> FilterState:
        """
        Advance the estimate with one new transition

        Args:
            x_next: Measured successor state
            C: Regressor of the previous state and input

        Returns:
            FilterState: The updated state (also stored on the instance)
        """
        pass

    @property
    def z_hat(self) -> ParamVector:
        return self.state.z_hat

    @property
    def P(self) -> np.ndarray:
        return self.state.P
