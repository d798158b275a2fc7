"""
Vectorization of system matrices and Kronecker regressors

Theta is stored as the (n+m) x n matrix [A B]^T and z = vec(Theta) stacks
its columns, so that C z = Theta^T d with C = I_n kron d^T. Every
estimator relies on this orientation.
"""
from typing import Optional
import numpy as np
from .base import (
    DimensionError,
    LinearModel,
    ParamVector,
    Regressor,
    as_matrix,
    as_vector,
)

def vectorize(theta: np.ndarray, n: Optional[int] = None, m: Optional[int] = None) -> ParamVector:
    """
    Stack the columns of the parameter matrix Theta

    Args:
        theta: (n+m) x n parameter matrix
        n: Declared state dimension (defaults to theta's column count)
        m: Declared input dimension (defaults to rows - n)

    Returns:
        ParamVector with z = vec(Theta)

    Raises:
        DimensionError: If theta's shape disagrees with (n, m)
    """
    theta = as_matrix(theta, "theta")
    rows, cols = theta.shape
    n = cols if n is None else n
    m = rows - n if m is None else m
    if theta.shape != (n + m, n):
        raise DimensionError(
            f"theta must have shape (n+m, n) = {(n + m, n)}, got {theta.shape}"
        )
    return ParamVector(z=theta.reshape(-1, order="F"), n=n, m=m)

def unvectorize(z, n: int, m: int) -> np.ndarray:
    """
    Recover Theta from its vectorization

    Args:
        z: ParamVector or raw vector of length n(n+m)
        n: State dimension
        m: Input dimension

    Returns:
        np.ndarray: (n+m) x n parameter matrix
    """
    raw = z.z if isinstance(z, ParamVector) else as_vector(z, "z")
    if raw.size != n * (n + m):
        raise DimensionError(f"z must have length {n * (n + m)}, got {raw.size}")
    return raw.reshape((n + m, n), order="F")

def regressor(x, u) -> Regressor:
    """
    Build the regressor of one step

    Args:
        x: State vector (length n)
        u: Input vector (length m, may be empty)

    Returns:
        Regressor with d = [x; u] and C = I_n kron d^T
    """
    x = as_vector(x, "x")
    u = as_vector(u, "u")
    if x.size == 0:
        raise DimensionError("x must not be empty")
    d = np.concatenate([x, u])
    C = np.kron(np.eye(x.size), d[np.newaxis, :])
    return Regressor(d=d, C=C)

def model_to_params(model: LinearModel) -> ParamVector:
    """Vectorize a model as z = vec([A B]^T)"""
    theta = np.hstack([model.A, model.B]).T
    return vectorize(theta, model.n, model.m)

def params_to_model(params: ParamVector) -> LinearModel:
    """Rebuild (A, B) from a parameter vector"""
    stacked = unvectorize(params, params.n, params.m).T
    return LinearModel(A=stacked[:, :params.n], B=stacked[:, params.n:])
