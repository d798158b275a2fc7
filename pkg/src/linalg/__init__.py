"""
Numerical primitives: vectorization, discretization, statistics and excitation checks
"""
from .base import (
    ContinuousModel,
    DimensionError,
    LinalgError,
    LinearModel,
    NonFiniteError,
    ParamVector,
    Regressor,
    SingularCovarianceError,
)
from .discretization import matrix_exponential, zoh_discretize
from .excitation import observability_rank, pe_check
from .statistics import chi2_quantile, mahalanobis_sq
from .vectorization import (
    model_to_params,
    params_to_model,
    regressor,
    unvectorize,
    vectorize,
)
