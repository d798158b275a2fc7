"""
Chi-square quantiles and Mahalanobis distances for the learning trigger
"""
import numpy as np
from scipy import linalg
from scipy import special
from scipy.optimize import brentq
from scipy.stats import chi2
from .base import DimensionError, SingularCovarianceError, as_matrix, as_vector

QUANTILE_TOL = 1e-6
NEWTON_STEPS = 3

def chi2_cdf(q: float, dof: int) -> float:
    """CDF of the chi-square distribution as the regularized lower incomplete gamma"""
    if q <= 0:
        return 0.0
    return float(special.gammainc(dof / 2.0, q / 2.0))

def chi2_quantile(p: float, dof: int) -> float:
    """
    Inverse CDF of the chi-square distribution

    Bracketing root search on the regularized incomplete gamma function,
    polished with a few Newton steps on the density.

    Args:
        p: Probability in (0, 1)
        dof: Degrees of freedom, at least 1

    Returns:
        float: q with CDF(q) = p within 1e-6

    Raises:
        ValueError: If p is outside (0, 1) or dof < 1
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"Probability must lie in (0, 1), got {p}")
    if int(dof) != dof or dof < 1:
        raise ValueError(f"Degrees of freedom must be a positive integer, got {dof}")
    dof = int(dof)

    def residual(q: float) -> float:
        return chi2_cdf(q, dof) - p

    upper = max(1.0, float(dof))
    while residual(upper) < 0:
        upper *= 2.0

    q = brentq(residual, 0.0, upper, xtol=1e-12, rtol=1e-14, maxiter=500)

    for _ in range(NEWTON_STEPS):
        density = chi2.pdf(q, dof)
        if density <= 0:
            break
        candidate = q - residual(q) / density
        if candidate <= 0 or abs(residual(candidate)) >= abs(residual(q)):
            break
        q = candidate

    if abs(residual(q)) > QUANTILE_TOL:
        raise ArithmeticError(f"Chi-square quantile did not converge for p={p}, dof={dof}")
    return float(q)

def cholesky_factor(P, name: str = "P") -> np.ndarray:
    """
    Lower Cholesky factor of a covariance matrix

    Raises:
        SingularCovarianceError: If P is not symmetric positive definite
    """
    P = as_matrix(P, name)
    if P.shape[0] != P.shape[1]:
        raise DimensionError(f"{name} must be square, got {P.shape}")
    if not np.allclose(P, P.T, rtol=1e-8, atol=1e-12):
        raise SingularCovarianceError(f"{name} is not symmetric")
    try:
        return linalg.cholesky(P, lower=True)
    except linalg.LinAlgError as e:
        raise SingularCovarianceError(f"{name} is not positive definite: {str(e)}")

def mahalanobis_sq(v, P) -> float:
    """
    Squared Mahalanobis distance v^T P^{-1} v

    Computed with a triangular solve against the Cholesky factor of P,
    never by forming the inverse.

    Args:
        v: Residual vector
        P: Symmetric positive definite covariance

    Returns:
        float: Nonnegative distance

    Raises:
        DimensionError: If v and P disagree in size
        SingularCovarianceError: If P is not positive definite
    """
    v = as_vector(v, "v")
    L = cholesky_factor(P)
    if L.shape[0] != v.size:
        raise DimensionError(f"Residual has length {v.size}, covariance is {L.shape}")
    y = linalg.solve_triangular(L, v, lower=True)
    return float(y @ y)
