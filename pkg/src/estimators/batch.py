"""
Batch least squares identification over a data record
"""
from typing import Optional, Sequence, Union
import numpy as np
from scipy import linalg
from src.linalg.base import DimensionError, ParamVector, Regressor, as_vector
from src.linalg.excitation import observability_rank
from .base import NotPersistentlyExcitingError

def batch_ls(states: Sequence, regressors: Sequence[Union[Regressor, np.ndarray]],
             n: Optional[int] = None, m: Optional[int] = None) -> ParamVector:
    """
    Least squares estimate z = (C^T C)^{-1} C^T X over stacked data

    Solved through a QR factorization of the stacked regressor rather than
    the normal equations.

    Args:
        states: Successor states x_1..x_k
        regressors: Regressors C_0..C_{k-1}
        n: State dimension (read from the regressor shape if omitted)
        m: Input dimension (read from the regressor shape if omitted)

    Returns:
        ParamVector: Minimizer of the stacked squared prediction error

    Raises:
        DimensionError: If the record is empty or inconsistent
        NotPersistentlyExcitingError: If the stacked regressor is rank deficient
    """
    if len(states) != len(regressors) or len(states) == 0:
        raise DimensionError(
            f"Need equally many states and regressors, got {len(states)} and {len(regressors)}"
        )
    first = regressors[0].C if isinstance(regressors[0], Regressor) else np.asarray(regressors[0])
    if n is None:
        n = first.shape[0]
    if m is None:
        m = first.shape[1] // n - n
    dof = n * (n + m)
    rank = observability_rank(regressors)
    if rank < dof:
        raise NotPersistentlyExcitingError(rank=rank, required=dof)

    C = np.vstack([r.C if isinstance(r, Regressor) else np.asarray(r, dtype=float)
                   for r in regressors])
    X = np.concatenate([as_vector(x, "x") for x in states])
    if C.shape != (X.size, dof):
        raise DimensionError(f"Stacked regressor has shape {C.shape}, expected {(X.size, dof)}")

    Q, R = linalg.qr(C, mode="economic")
    z = linalg.solve_triangular(R, Q.T @ X, lower=False)
    return ParamVector(z=z, n=n, m=m)
