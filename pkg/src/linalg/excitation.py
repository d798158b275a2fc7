"""
Persistency of excitation and observability checks on regressor data
"""
from typing import Sequence, Union
import numpy as np
from .base import DimensionError, Regressor, as_matrix, as_vector

PSD_SLACK = 1e-10
RANK_RTOL = 1e-9

def gram_matrix(data: Sequence) -> np.ndarray:
    """
    Sum of outer products d_t d_t^T over a sequence of data vectors

    Raises:
        DimensionError: If the sequence is empty or ragged
    """
    vectors = [as_vector(d, "d") for d in data]
    if not vectors:
        raise DimensionError("Excitation data must not be empty")
    size = vectors[0].size
    if any(v.size != size for v in vectors):
        raise DimensionError("Excitation data vectors have unequal lengths")
    stacked = np.vstack(vectors)
    return stacked.T @ stacked

def pe_check(data: Sequence, eps: float) -> bool:
    """
    Test persistency of excitation over the given interval

    Args:
        data: Sequence of d vectors (stacked state and input)
        eps: Required lower bound on the Gram matrix

    Returns:
        bool: True iff sum d d^T - eps I is positive semi-definite
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    gram = gram_matrix(data)
    smallest = np.linalg.eigvalsh(gram - eps * np.eye(gram.shape[0]))[0]
    return bool(smallest >= -PSD_SLACK)

def observability_rank(regressors: Sequence[Union[Regressor, np.ndarray]]) -> int:
    """
    Numerical rank of the stacked observability matrix [C_0; C_1; ...]

    Full observability of the parameter system holds iff the rank equals n(n+m).

    Args:
        regressors: Regressor objects or raw C matrices of one shape

    Returns:
        int: Number of singular values above 1e-9 * sigma_max
    """
    matrices = [
        as_matrix(r.C if isinstance(r, Regressor) else r, "C") for r in regressors
    ]
    if not matrices:
        raise DimensionError("At least one regressor is required")
    shape = matrices[0].shape
    if any(C.shape != shape for C in matrices):
        raise DimensionError("Regressor matrices have inconsistent shapes")

    singular_values = np.linalg.svd(np.vstack(matrices), compute_uv=False)
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > RANK_RTOL * singular_values[0]))
