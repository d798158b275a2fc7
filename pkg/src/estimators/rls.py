"""
Recursive least squares with optional exponential forgetting
"""
import numpy as np
from scipy import linalg
from src.linalg.base import Regressor
from .base import (
    BaseEstimator,
    DegenerateNoiseError,
    FilterState,
    check_step_inputs,
    symmetrize,
)

def rls_step(state: FilterState, x_next, C: Regressor, lam: float = 1.0) -> FilterState:
    """
    One recursive least squares update

    K = P C^T (lam I + C P C^T)^{-1}
    z+ = z + K (x_next - C z)
    P+ = (I - K C) P / lam

    With lam = 1 this is the plain recursion of the batch estimate; lam < 1
    discounts a sample l steps old by lam^(k-l).

    Args:
        state: Current estimate
        x_next: Measured successor state
        C: Regressor of the previous state and input
        lam: Forgetting factor in (0, 1]

    Returns:
        FilterState: Updated estimate

    Raises:
        ValueError: If lam is outside (0, 1]
        DegenerateNoiseError: If the gain denominator cannot be factorized
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"Forgetting factor must lie in (0, 1], got {lam}")
    x_next, C = check_step_inputs(state, x_next, C)
    P = state.P
    z = state.z_hat.z

    CP = C @ P
    denominator = symmetrize(lam * np.eye(C.shape[0]) + CP @ C.T)
    try:
        factor = linalg.cho_factor(denominator, lower=True)
    except linalg.LinAlgError as e:
        raise DegenerateNoiseError(f"RLS gain denominator is singular: {str(e)}")

    K = linalg.cho_solve(factor, CP).T
    z_new = z + K @ (x_next - C @ z)
    P_new = symmetrize((P - K @ CP) / lam)
    return state.advance(z_new, P_new)

class RecursiveLeastSquares(BaseEstimator):
    """
    Stateful wrapper around rls_step

    Attributes:
        lam: Forgetting factor
    """

    def __init__(self, state: FilterState, lam: float = 1.0):
        super().__init__(state)
        if not 0.0 < lam <= 1.0:
            raise ValueError(f"Forgetting factor must lie in (0, 1], got {lam}")
        self.lam = lam

    def update(self, x_next, C) -> FilterState:
        self.state = rls_step(self.state, x_next, C, self.lam)
        return self.state
