"""
Level-alpha learning trigger on the parameter filter estimate

The trigger fires when the squared Mahalanobis distance between the
filter estimate and the fixed control model exceeds the (1 - alpha)
chi-square quantile with n(n+m) degrees of freedom.
"""
from dataclasses import dataclass, replace
import math
from typing import Optional
from src.estimators.base import FilterState
from src.linalg.base import DimensionError, ParamVector
from src.linalg.statistics import chi2_quantile, mahalanobis_sq
from src.utils.logger import get_logger

logger = get_logger(__name__)

@dataclass(frozen=True)
class TriggerConfig:
    """
    Test settings

    Attributes:
        alpha: Significance level in (0, 1)
        z_star: Fixed model in vectorized form
    """
    alpha: float
    z_star: ParamVector

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def dof(self) -> int:
        return self.z_star.dof

    @property
    def threshold(self) -> float:
        return chi2_quantile(1.0 - self.alpha, self.dof)

@dataclass(frozen=True)
class TriggerDecision:
    """
    Outcome of one test

    Attributes:
        fired: True iff statistic > threshold
        statistic: Squared Mahalanobis distance of estimate and model
        threshold: Chi-square quantile of level 1 - alpha
    """
    fired: bool
    statistic: float
    threshold: float

    @property
    def normalized(self) -> float:
        return self.statistic / self.threshold

def evaluate_trigger(state: FilterState, cfg: TriggerConfig,
                     threshold: Optional[float] = None) -> TriggerDecision:
    """
    Test H0: the filter estimate agrees with the fixed model

    Args:
        state: Filter estimate and covariance
        cfg: Level and fixed model
        threshold: Precomputed cfg.threshold, to skip the quantile search

    Returns:
        TriggerDecision

    Raises:
        DimensionError: If the model and estimate sizes differ
        SingularCovarianceError: If P is not positive definite; the test is
            undefined then and must not be read as "no trigger"
    """
    if state.z_hat.dof != cfg.dof:
        raise DimensionError(
            f"Estimate has {state.z_hat.dof} parameters, model has {cfg.dof}"
        )
    statistic = mahalanobis_sq(state.z_hat.z - cfg.z_star.z, state.P)
    limit = cfg.threshold if threshold is None else threshold
    return TriggerDecision(fired=statistic > limit, statistic=statistic, threshold=limit)

def model_truth_bound(decision: TriggerDecision) -> Optional[float]:
    """
    High-probability bound on the model-truth distance after a passed test

    Returns sqrt(2) times the threshold as the bound on
    ||z* - z_k||^2 in the P^{-1} norm, or None if the trigger fired.
    """
    if decision.fired:
        return None
    return math.sqrt(2.0) * decision.threshold

class LearningTrigger:
    """
    Trigger with a cached threshold and a rebindable model

    Attributes:
        config: Current TriggerConfig
        threshold: Cached chi-square quantile
    """

    def __init__(self, config: TriggerConfig):
        self.config = config
        self.threshold = config.threshold
        logger.debug(
            f"Learning trigger armed: alpha={config.alpha}, dof={config.dof}, "
            f"threshold={self.threshold:.4f}"
        )

    def evaluate(self, state: FilterState) -> TriggerDecision:
        return evaluate_trigger(state, self.config, self.threshold)

    def rebind(self, z_star: ParamVector) -> None:
        """Replace the fixed model after a model update"""
        if z_star.dof != self.config.dof:
            raise DimensionError(f"New model has {z_star.dof} parameters, expected {self.config.dof}")
        self.config = replace(self.config, z_star=z_star)
        logger.debug("Learning trigger rebound to a new model")
