"""
Kalman filter over the vectorized system parameters

The parameters are the hidden state: z+ = z + dz with dz ~ N(0, sigma_z),
and each measured transition x_{k+1} = C_k z_k + w_k is the observation.
"""
from typing import Optional, Tuple
from scipy import linalg
from src.linalg.base import Regressor
from .base import (
    BaseEstimator,
    DegenerateNoiseError,
    FilterState,
    KfStepTrace,
    NoiseConfig,
    check_step_inputs,
    symmetrize,
)

def kf_step(state: FilterState, x_next, C: Regressor,
            noise: NoiseConfig) -> Tuple[FilterState, KfStepTrace]:
    """
    One predict/update cycle of the parameter filter

    Args:
        state: Estimate z_{k|k}, P_{k|k}
        x_next: Measured state x_{k+1}
        C: Regressor I_n kron [x_k; u_k]^T
        noise: Disturbance and drift covariances

    Returns:
        Tuple of the updated state z_{k+1|k+1}, P_{k+1|k+1} and the step trace

    Raises:
        DegenerateNoiseError: If the innovation covariance is not positive definite
    """
    x_next, C = check_step_inputs(state, x_next, C)
    z_pred = state.z_hat.z
    P_pred = state.P + noise.sigma_z

    e = x_next - C @ z_pred
    CP = C @ P_pred
    S = symmetrize(CP @ C.T + noise.sigma_w)
    try:
        factor = linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as err:
        raise DegenerateNoiseError(
            f"Innovation covariance is not positive definite; check sigma_w: {str(err)}"
        )

    # K = P_pred C^T S^{-1}, using the symmetry of S and P_pred
    K = linalg.cho_solve(factor, CP).T
    z_new = z_pred + K @ e
    P_new = symmetrize(P_pred - K @ CP)

    trace = KfStepTrace(e=e, S=S, K=K, P_pred=P_pred)
    return state.advance(z_new, P_new), trace

class KalmanParameterFilter(BaseEstimator):
    """
    Stateful parameter filter used by the closed loop

    Attributes:
        noise: Filter noise assumptions
        last_trace: Intermediate quantities of the latest update
    """

    def __init__(self, state: FilterState, noise: NoiseConfig):
        super().__init__(state)
        if noise.dof != state.z_hat.dof:
            raise ValueError(
                f"sigma_z has {noise.dof} rows but the estimate has {state.z_hat.dof} parameters"
            )
        self.noise = noise
        self.last_trace: Optional[KfStepTrace] = None

    def update(self, x_next, C) -> FilterState:
        self.state, self.last_trace = kf_step(self.state, x_next, C, self.noise)
        return self.state
