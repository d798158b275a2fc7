"""
Zero-order-hold discretization via the matrix exponential
"""
import numpy as np
from scipy.linalg import expm
from .base import (
    ContinuousModel,
    DimensionError,
    LinearModel,
    NonFiniteError,
    as_matrix,
)

def matrix_exponential(M) -> np.ndarray:
    """
    Matrix exponential exp(M)

    Uses scaling-and-squaring with a Pade core (scipy.linalg.expm).

    Args:
        M: Square matrix

    Returns:
        np.ndarray: exp(M)

    Raises:
        DimensionError: If M is not square
        NonFiniteError: If M or the result has non-finite entries
    """
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"M must be square, got {M.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        result = expm(M)
    if not np.all(np.isfinite(result)):
        raise NonFiniteError("Matrix exponential overflowed")
    return result

def zoh_discretize(cm: ContinuousModel, Ts: float) -> LinearModel:
    """
    Exact discretization assuming inputs are held constant over each sample.

    With the augmented matrix

             |A_c B_c|
        exp (|0   0  | Ts) = |A  B|
                             |0  I|

    A = exp(A_c Ts) and B = int_0^Ts exp(A_c t) dt B_c.

    Args:
        cm: Continuous-time model
        Ts: Sampling time in seconds

    Returns:
        LinearModel: Discrete-time (A, B)

    Raises:
        ValueError: If Ts is not positive
        NonFiniteError: If the exponential overflows
    """
    if not Ts > 0:
        raise ValueError(f"Sampling time must be positive, got {Ts}")

    n, m = cm.n, cm.m
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = cm.A_c
    augmented[:n, n:] = cm.B_c

    try:
        phi = matrix_exponential(augmented * Ts)
    except NonFiniteError as e:
        raise NonFiniteError(f"ZOH discretization failed for Ts={Ts}: {str(e)}")

    return LinearModel(A=phi[:n, :n], B=phi[:n, n:])
