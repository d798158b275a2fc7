"""
Core linear-system types shared by the estimators, trigger and controllers
"""
from dataclasses import dataclass
import numpy as np

class LinalgError(Exception):
    """Base exception for numerical primitive errors"""
    pass

class DimensionError(LinalgError, ValueError):
    """Raised when array shapes disagree with the declared dimensions"""
    pass

class SingularCovarianceError(LinalgError):
    """Raised when a covariance matrix is not positive definite"""
    pass

class NonFiniteError(LinalgError):
    """Raised when an input or result contains NaN or infinite entries"""
    pass

def as_matrix(value, name: str) -> np.ndarray:
    """
    Convert input to a finite 2-D float array

    Args:
        value: Array-like input
        name: Name used in error messages

    Returns:
        np.ndarray: 2-D float array

    Raises:
        DimensionError: If the input is not two-dimensional
        NonFiniteError: If the input has NaN or infinite entries
    """
    matrix = np.array(value, dtype=float)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D array, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return matrix

def as_vector(value, name: str) -> np.ndarray:
    """Convert input to a finite 1-D float array"""
    vector = np.array(value, dtype=float).reshape(-1)
    if not np.all(np.isfinite(vector)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return vector

@dataclass(frozen=True)
class LinearModel:
    """
    Discrete-time system x+ = A x + B u

    Attributes:
        A: n x n transition matrix
        B: n x m input matrix
    """
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = np.array(self.B, dtype=float)
        if B.size == 0:
            B = np.zeros((A.shape[0], 0))
        elif B.ndim == 1:
            B = B.reshape(A.shape[0], -1)
        B = as_matrix(B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B must have {A.shape[0]} rows, got {B.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def predict(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Noise-free one-step prediction"""
        return self.A @ x + self.B @ u

@dataclass(frozen=True)
class ContinuousModel:
    """
    Continuous-time system dx/dt = A_c x + B_c u (no noise)

    Attributes:
        A_c: n x n matrix
        B_c: n x m matrix
    """
    A_c: np.ndarray
    B_c: np.ndarray

    def __post_init__(self):
        A_c = as_matrix(self.A_c, "A_c")
        B_c = as_matrix(self.B_c, "B_c")
        if A_c.shape[0] != A_c.shape[1]:
            raise DimensionError(f"A_c must be square, got {A_c.shape}")
        if B_c.shape[0] != A_c.shape[0]:
            raise DimensionError(f"B_c must have {A_c.shape[0]} rows, got {B_c.shape[0]}")
        object.__setattr__(self, "A_c", A_c)
        object.__setattr__(self, "B_c", B_c)

    @property
    def n(self) -> int:
        return self.A_c.shape[0]

    @property
    def m(self) -> int:
        return self.B_c.shape[1]

@dataclass(frozen=True)
class ParamVector:
    """
    Vectorized parameter matrix z = vec(Theta), column-major over
    the (n+m) x n matrix Theta = [A B]^T

    Attributes:
        z: Vector of length n(n+m)
        n: State dimension
        m: Input dimension
    """
    z: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        z = as_vector(self.z, "z")
        if self.n < 1 or self.m < 0:
            raise DimensionError(f"Invalid dimensions n={self.n}, m={self.m}")
        if z.size != self.n * (self.n + self.m):
            raise DimensionError(
                f"z must have length n(n+m) = {self.n * (self.n + self.m)}, got {z.size}"
            )
        object.__setattr__(self, "z", z)

    @property
    def dof(self) -> int:
        return self.z.size

    def __len__(self) -> int:
        return self.z.size

@dataclass(frozen=True)
class Regressor:
    """
    Data of one step: d = [x; u] and C = I_n kron d^T

    Attributes:
        d: Stacked state and input, length n+m
        C: n x n(n+m) regressor matrix
    """
    d: np.ndarray
    C: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[0]
