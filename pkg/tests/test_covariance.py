import numpy as np
import pytest
from src.controllers.covariance import covariance_rollout, covariance_step, plan_regressor, trace_path
from src.estimators.base import DegenerateNoiseError, NoiseConfig
from src.linalg.base import DimensionError

def test_zero_plan_without_drift_keeps_p0():
    P0 = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    noise = NoiseConfig(sigma_w=np.eye(2), sigma_z=np.zeros((6, 6)))
    path = covariance_rollout(np.zeros((4, 2)), np.zeros((3, 1)), P0, noise)
    assert len(path) == 4
    for P in path:
        np.testing.assert_allclose(P, P0)

def test_zero_plan_with_drift_grows_trace():
    """Only drift acts on a zero plan: trace grows by dof * sigma^2 per step"""
    sigma2 = 0.01
    noise = NoiseConfig(sigma_w=np.eye(2), sigma_z=sigma2 * np.eye(6))
    traces = trace_path(covariance_rollout(np.zeros((5, 2)), np.zeros((5, 1)), np.eye(6), noise))
    np.testing.assert_allclose(np.diff(traces), 6 * sigma2)
    without = trace_path(covariance_rollout(np.zeros((5, 2)), np.zeros((5, 1)), np.eye(6), noise, include_drift=False))
    np.testing.assert_allclose(without, 6.0)

def test_scalar_information_recursion():
    """x = 1 each step, unit noise: P_k = 1 / (1 + k)"""
    noise = NoiseConfig(sigma_w=[[1.0]], sigma_z=[[0.0]])
    N = 8
    path = covariance_rollout(np.ones((N + 1, 1)), np.zeros((N, 0)), [[1.0]], noise)
    np.testing.assert_allclose([P[0, 0] for P in path], [1.0 / (1 + k) for k in range(N + 1)], rtol=1e-12)

def test_rollout_is_bounded_by_open_loop_prediction(rng):
    """Every predicted covariance lies below P0 + k sigma_z in the Loewner order"""
    n, m, N = 2, 1, 6
    dof = n * (n + m)
    L = rng.standard_normal((dof, dof))
    P0 = L @ L.T / dof + np.eye(dof)
    noise = NoiseConfig(sigma_w=0.1 * np.eye(n), sigma_z=1e-3 * np.eye(dof))
    path = covariance_rollout(rng.standard_normal((N + 1, n)), rng.standard_normal((N, m)), P0, noise)
    for k, P in enumerate(path):
        gap = P0 + k * noise.sigma_z - P
        assert np.linalg.eigvalsh(gap)[0] >= -1e-10
        assert np.linalg.eigvalsh(P)[0] > 0

def test_excitation_shrinks_trace(rng):
    noise = NoiseConfig(sigma_w=0.1 * np.eye(2), sigma_z=np.zeros((6, 6)))
    small = trace_path(covariance_rollout(0.1 * np.ones((4, 2)), 0.1 * np.ones((3, 1)), np.eye(6), noise))
    large = trace_path(covariance_rollout(np.ones((4, 2)), np.ones((3, 1)), np.eye(6), noise))
    assert large[-1] < small[-1]

def test_rollout_accepts_flat_inputs():
    noise = NoiseConfig(sigma_w=np.eye(2), sigma_z=np.zeros((6, 6)))
    path = covariance_rollout(np.ones((3, 2)), np.ones(3), np.eye(6), noise)
    assert len(path) == 4

def test_rollout_dimension_errors():
    noise = NoiseConfig(sigma_w=np.eye(2), sigma_z=np.zeros((6, 6)))
    with pytest.raises(DimensionError):
        covariance_rollout(np.zeros((6, 2)), np.zeros((3, 1)), np.eye(6), noise)
    with pytest.raises(DimensionError):
        covariance_rollout(np.zeros((4, 2)), np.zeros((3, 1)), np.eye(5), noise)

def test_covariance_step_degenerate_noise():
    noise = NoiseConfig(sigma_w=[[0.0]], sigma_z=[[0.0]])
    with pytest.raises(DegenerateNoiseError):
        covariance_step(np.array([[1.0]]), plan_regressor(np.zeros(1), np.zeros(0)), noise)
