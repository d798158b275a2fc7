"""
Predicted covariance of the parameter filter along a planned trajectory
"""
from typing import List
import numpy as np
from scipy import linalg
from src.estimators.base import DegenerateNoiseError, NoiseConfig, symmetrize
from src.linalg.base import DimensionError, as_matrix

def plan_regressor(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """I_n kron [x; u]^T for a planned state and input"""
    d = np.concatenate([x, u])
    return np.kron(np.eye(x.size), d[None, :])

def covariance_step(P: np.ndarray, C: np.ndarray, noise: NoiseConfig,
                    include_drift: bool = True) -> np.ndarray:
    """
    Covariance part of one parameter filter step

    Raises:
        DegenerateNoiseError: If the innovation covariance is singular
    """
    P_pred = P + noise.sigma_z if include_drift else P
    CP = C @ P_pred
    S = symmetrize(CP @ C.T + noise.sigma_w)
    try:
        factor = linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as e:
        raise DegenerateNoiseError(f"Predicted innovation covariance is singular: {str(e)}")
    K = linalg.cho_solve(factor, CP).T
    return symmetrize(P_pred - K @ CP)

def covariance_rollout(plan_states, plan_inputs, P0, noise: NoiseConfig,
                       include_drift: bool = True) -> List[np.ndarray]:
    """
    Propagate the filter covariance along a plan without measurements

    The measurement update depends only on the regressors, so the
    covariance of the filter is known in advance for a given plan.

    Args:
        plan_states: Planned states, N or N+1 rows (x_0 first)
        plan_inputs: Planned inputs, N rows (N x 0 for autonomous rigs)
        P0: Current filter covariance P_{k|k}
        noise: Filter noise assumptions
        include_drift: Add sigma_z before each measurement update

    Returns:
        List of the N+1 covariances P_{0|0} .. P_{N|N}

    Raises:
        DimensionError: If the plan or covariance sizes disagree
    """
    states = np.atleast_2d(np.asarray(plan_states, dtype=float))
    inputs = np.asarray(plan_inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, 1)
    horizon = inputs.shape[0]
    if states.shape[0] not in (horizon, horizon + 1):
        raise DimensionError(
            f"Plan has {states.shape[0]} states for {horizon} inputs"
        )
    P = as_matrix(P0, "P0")
    n, m = states.shape[1], inputs.shape[1]
    dof = n * (n + m)
    if P.shape != (dof, dof) or noise.dof != dof:
        raise DimensionError(
            f"Covariances must be {dof} x {dof} for n={n}, m={m}, got P0 {P.shape}, sigma_z {noise.sigma_z.shape}"
        )

    path = [P]
    for k in range(horizon):
        P = covariance_step(P, plan_regressor(states[k], inputs[k]), noise, include_drift)
        path.append(P)
    return path

def trace_path(covariances: List[np.ndarray]) -> np.ndarray:
    return np.array([np.trace(P) for P in covariances])
