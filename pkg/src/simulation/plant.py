"""
True plant propagation with additive disturbances
"""
from enum import Enum
import numpy as np
from scipy import linalg
from src.linalg.base import DimensionError, LinearModel, as_matrix

class NoiseDistribution(Enum):
    """Shape of the unit-variance disturbance draws"""
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    UNIFORM = "uniform"

class Disturbance:
    """
    Zero-mean disturbance with covariance sigma_w

    Draws are unit-variance per component and colored by a square root of
    sigma_w, so the covariance is sigma_w for every distribution.

    Attributes:
        sigma_w: n x n covariance
        distribution: Shape of the draws
    """

    def __init__(self, sigma_w, distribution: NoiseDistribution = NoiseDistribution.GAUSSIAN):
        self.sigma_w = as_matrix(sigma_w, "sigma_w")
        self.distribution = NoiseDistribution(distribution)
        self.factor = self._square_root(self.sigma_w)

    @staticmethod
    def _square_root(sigma_w: np.ndarray) -> np.ndarray:
        if not np.any(sigma_w):
            return np.zeros_like(sigma_w)
        try:
            return linalg.cholesky(sigma_w, lower=True)
        except linalg.LinAlgError:
            # Semi-definite: symmetric square root
            values, vectors = linalg.eigh(sigma_w)
            return vectors * np.sqrt(np.clip(values, 0.0, None))

    @property
    def n(self) -> int:
        return self.sigma_w.shape[0]

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        if self.distribution == NoiseDistribution.GAUSSIAN:
            unit = rng.standard_normal(self.n)
        elif self.distribution == NoiseDistribution.LAPLACE:
            unit = rng.laplace(0.0, 1.0 / np.sqrt(2.0), self.n)
        else:
            unit = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), self.n)
        return self.factor @ unit

def step_plant(model: LinearModel, x, u, rng: np.random.Generator,
               disturbance: Disturbance) -> np.ndarray:
    """
    Propagate the true plant one step: A x + B u + w

    Args:
        model: True system matrices
        x: Current state
        u: Applied input
        rng: The run's random generator
        disturbance: Disturbance source

    Returns:
        np.ndarray: Next state

    Raises:
        DimensionError: If the state or input size does not match the model
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != model.n or u.size != model.m or disturbance.n != model.n:
        raise DimensionError(
            f"Plant expects x of length {model.n} and u of length {model.m}, got {x.size} and {u.size}"
        )
    return model.predict(x, u) + disturbance.draw(rng)
