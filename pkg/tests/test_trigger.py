import math
import numpy as np
import pytest
from src.estimators.base import FilterState, NoiseConfig
from src.estimators.kalman import kf_step
from src.linalg.base import DimensionError, ParamVector, SingularCovarianceError
from src.linalg.vectorization import regressor
from src.trigger.learning_trigger import (
    LearningTrigger,
    TriggerConfig,
    TriggerDecision,
    evaluate_trigger,
    model_truth_bound,
)

def _scalar_state(z, P):
    return FilterState(z_hat=ParamVector(z=[z], n=1, m=0), P=[[P]])

def _config(alpha, z_star=0.0):
    return TriggerConfig(alpha=alpha, z_star=ParamVector(z=[z_star], n=1, m=0))

@pytest.mark.parametrize("alpha", [0.001, 0.01, 0.05, 0.5])
def test_matching_estimate_never_fires(alpha):
    decision = evaluate_trigger(_scalar_state(1.5, 2.0), _config(alpha, z_star=1.5))
    assert decision.statistic == 0.0
    assert not decision.fired

def test_scalar_examples():
    fired = evaluate_trigger(_scalar_state(2.0, 1.0), _config(0.05))
    assert fired.fired
    assert fired.statistic == pytest.approx(4.0)
    assert fired.threshold == pytest.approx(3.8415, abs=1e-3)
    quiet = evaluate_trigger(_scalar_state(2.0, 4.0), _config(0.05))
    assert not quiet.fired
    assert quiet.statistic == pytest.approx(1.0)

def test_threshold_decreases_with_alpha():
    """A larger level gives a smaller threshold, so the trigger fires more often"""
    z_star = ParamVector(z=np.zeros(20), n=4, m=1)
    thresholds = [TriggerConfig(alpha=a, z_star=z_star).threshold for a in (0.001, 0.01, 0.05, 0.2)]
    assert all(a > b for a, b in zip(thresholds, thresholds[1:]))
    assert thresholds[1] == pytest.approx(37.566, abs=1e-3)

def test_reparameterization_invariance(rng):
    """The decision depends on the estimate only through the P-weighted residual"""
    dof = 6
    for _ in range(50):
        L = rng.standard_normal((dof, dof))
        P = L @ L.T + np.eye(dof)
        z_hat = rng.standard_normal(dof)
        z_star = rng.standard_normal(dof)
        T = rng.standard_normal((dof, dof)) + 4.0 * np.eye(dof)
        base = evaluate_trigger(
            FilterState(z_hat=ParamVector(z=z_hat, n=2, m=1), P=P),
            TriggerConfig(alpha=0.05, z_star=ParamVector(z=z_star, n=2, m=1)),
        )
        TPT = T @ P @ T.T
        moved = evaluate_trigger(
            FilterState(z_hat=ParamVector(z=T @ z_hat, n=2, m=1), P=0.5 * (TPT + TPT.T)),
            TriggerConfig(alpha=0.05, z_star=ParamVector(z=T @ z_star, n=2, m=1)),
        )
        assert moved.statistic == pytest.approx(base.statistic, rel=1e-8)
        assert moved.fired == base.fired

def test_model_truth_bound():
    assert model_truth_bound(TriggerDecision(fired=True, statistic=5.0, threshold=3.8415)) is None
    bound = model_truth_bound(TriggerDecision(fired=False, statistic=1.0, threshold=3.8415))
    assert bound == pytest.approx(5.4327, abs=1e-4)
    assert bound > 3.8415

def test_singular_covariance_is_an_error():
    """A degenerate P leaves the test undefined rather than quiet"""
    with pytest.raises(SingularCovarianceError):
        evaluate_trigger(_scalar_state(1.0, 0.0), _config(0.05))

def test_dimension_mismatch():
    state = FilterState(z_hat=ParamVector(z=np.zeros(2), n=1, m=1), P=np.eye(2))
    with pytest.raises(DimensionError):
        evaluate_trigger(state, _config(0.05))

@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
def test_alpha_must_be_a_level(alpha):
    with pytest.raises(ValueError):
        _config(alpha)

def test_learning_trigger_rebind():
    trigger = LearningTrigger(_config(0.05))
    state = _scalar_state(2.0, 1.0)
    assert trigger.evaluate(state).fired
    trigger.rebind(ParamVector(z=[2.0], n=1, m=0))
    assert not trigger.evaluate(state).fired
    assert trigger.threshold == pytest.approx(3.8415, abs=1e-3)
    with pytest.raises(DimensionError):
        trigger.rebind(ParamVector(z=[0.0, 0.0], n=1, m=1))

def test_power_grows_with_model_error(rng):
    """Firing frequency increases with the distance between model and truth"""
    rates = []
    for offset in (0.0, 0.3, 1.0):
        fired = 0
        for _ in range(400):
            state = _scalar_state(rng.normal(offset, 0.2), 0.04)
            fired += evaluate_trigger(state, _config(0.05)).fired
        rates.append(fired / 400)
    assert rates[0] < rates[1] < rates[2]
    assert rates[2] > 0.95

def _kf_false_positive_rate(rng, alpha, runs, steps):
    """Scalar random walk tracked by a consistent filter, tested at the last step"""
    sigma_w, sigma_z, p0 = 0.1, 1e-3, 1e-2
    noise = NoiseConfig(sigma_w=[[sigma_w]], sigma_z=[[sigma_z]])
    fired = 0
    for _ in range(runs):
        theta = rng.normal(0.5, math.sqrt(p0))
        state = _scalar_state(0.5, p0)
        x = 1.0
        for _ in range(steps):
            theta += rng.normal(0.0, math.sqrt(sigma_z))
            x_next = theta * x + rng.normal(0.0, math.sqrt(sigma_w))
            state, _ = kf_step(state, [x_next], regressor([x], []), noise)
        # Test against the realized parameter: the null hypothesis holds
        decision = evaluate_trigger(state, _config(alpha, z_star=theta))
        fired += decision.fired
    return fired / runs

def test_false_positive_rate_small_rig(rng):
    alpha, runs = 0.1, 2000
    rate = _kf_false_positive_rate(rng, alpha, runs, steps=20)
    assert abs(rate - alpha) <= 3.0 * math.sqrt(alpha * (1 - alpha) / runs) + 0.01

@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.01, 0.05])
def test_false_positive_rate_level(rng, alpha):
    runs = 5000
    rate = _kf_false_positive_rate(rng, alpha, runs, steps=50)
    assert abs(rate - alpha) <= 3.0 * math.sqrt(alpha * (1 - alpha) / runs)
