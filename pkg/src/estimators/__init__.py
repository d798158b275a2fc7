"""
Recursive identification schemes sharing one FilterState shape
"""
from .base import (
    BaseEstimator,
    DegenerateNoiseError,
    EstimatorError,
    FilterState,
    KfStepTrace,
    NoiseConfig,
    NotPersistentlyExcitingError,
    estimate_error_sq,
)
from .batch import batch_ls
from .kalman import KalmanParameterFilter, kf_step
from .rls import RecursiveLeastSquares, rls_step
