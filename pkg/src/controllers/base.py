"""
Shared MPC configuration, solution type and the condensed prediction model
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple
import numpy as np
from scipy import linalg
from src.linalg.base import DimensionError, LinearModel, as_matrix
from src.utils.logger import get_logger

FEASIBILITY_TOL = 1e-6
STABILIZABILITY_TOL = 1e-9

class ControllerError(Exception):
    """Base exception for controller errors"""
    pass

class SynthesisError(ControllerError):
    """Raised when a controller cannot be built for the given model"""
    pass

class SolveStatus(Enum):
    """Outcome of an MPC solve"""
    SOLVED = "solved"
    MAX_ITERATIONS = "max-iterations"
    INFEASIBLE = "infeasible"

class TerminalSet(Enum):
    """Terminal constraint on the last planned state"""
    ZERO = "zero"
    NONE = "none"

def _box(value, size: int, fill: float, name: str) -> np.ndarray:
    if value is None:
        return np.full(size, fill)
    box = np.array(value, dtype=float).reshape(-1)
    if box.size == 1:
        box = np.full(size, box[0])
    if box.size != size:
        raise DimensionError(f"{name} must have {size} entries, got {box.size}")
    return box

@dataclass(frozen=True)
class MpcConfig:
    """
    Finite-horizon regulator settings

    Attributes:
        Q: State weight (n x n, PSD)
        R: Input weight (m x m, PD)
        Q_N: Terminal weight (n x n, PSD)
        N: Horizon length
        nu: Weight of the predicted covariance trace (0 for the nominal MPC)
        x_min, x_max: State box (None for unbounded)
        G, h: Linear state constraints G x <= h
        u_min, u_max: Input box (None for unbounded)
        terminal: Terminal set of the last planned state
        rollout_includes_drift: Add sigma_z in the covariance rollout
        max_iter: Iteration cap of the experiment solver
    """
    Q: np.ndarray
    R: np.ndarray
    Q_N: np.ndarray
    N: int
    nu: float = 0.0
    x_min: Optional[np.ndarray] = None
    x_max: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    u_min: Optional[np.ndarray] = None
    u_max: Optional[np.ndarray] = None
    terminal: TerminalSet = TerminalSet.ZERO
    rollout_includes_drift: bool = True
    max_iter: int = 200

    def __post_init__(self):
        Q = as_matrix(self.Q, "Q")
        R = as_matrix(np.atleast_2d(self.R), "R")
        Q_N = as_matrix(self.Q_N, "Q_N")
        n, m = Q.shape[0], R.shape[0]
        if Q.shape != (n, n) or Q_N.shape != (n, n) or R.shape != (m, m):
            raise DimensionError(f"Weights must be square: Q {Q.shape}, R {R.shape}, Q_N {Q_N.shape}")
        if self.N < 1:
            raise ValueError(f"Horizon must be at least 1, got {self.N}")
        if self.nu < 0:
            raise ValueError(f"Covariance weight must be nonnegative, got {self.nu}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be positive, got {self.max_iter}")
        for name, W in (("Q", Q), ("Q_N", Q_N)):
            if not np.allclose(W, W.T) or np.linalg.eigvalsh(W)[0] < -1e-10:
                raise ValueError(f"{name} must be symmetric positive semi-definite")
        if m > 0 and (not np.allclose(R, R.T) or np.linalg.eigvalsh(R)[0] <= 0):
            raise ValueError("R must be symmetric positive definite")

        x_min = _box(self.x_min, n, -np.inf, "x_min")
        x_max = _box(self.x_max, n, np.inf, "x_max")
        u_min = _box(self.u_min, m, -np.inf, "u_min")
        u_max = _box(self.u_max, m, np.inf, "u_max")
        if self.G is None:
            G, h = np.zeros((0, n)), np.zeros(0)
        else:
            G = as_matrix(np.atleast_2d(self.G), "G")
            h = np.array(self.h, dtype=float).reshape(-1)
            if G.shape[1] != n or h.size != G.shape[0]:
                raise DimensionError(f"G must be p x {n} with h of length p, got {G.shape} and {h.size}")
        # Constraint sets must contain the origin
        if np.any(x_min > 0) or np.any(x_max < 0) or np.any(u_min > 0) or np.any(u_max < 0) or np.any(h < 0):
            raise ValueError("State and input constraint sets must contain the origin")

        for name, value in (("Q", Q), ("R", R), ("Q_N", Q_N), ("x_min", x_min), ("x_max", x_max),
                            ("G", G), ("h", h), ("u_min", u_min), ("u_max", u_max),
                            ("terminal", TerminalSet(self.terminal))):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def has_inequalities(self) -> bool:
        """True if any finite box bound or linear state constraint is set"""
        return bool(
            np.any(np.isfinite(self.x_min)) or np.any(np.isfinite(self.x_max))
            or np.any(np.isfinite(self.u_min)) or np.any(np.isfinite(self.u_max))
            or self.G.shape[0] > 0
        )

    def with_nu(self, nu: float) -> "MpcConfig":
        return replace(self, nu=nu)

@dataclass(frozen=True)
class MpcSolution:
    """
    Planned trajectory of one MPC solve

    Attributes:
        states: Planned x_0 .. x_N, shape (N+1, n)
        inputs: Planned u_0 .. u_{N-1}, shape (N, m)
        cost: Achieved objective (quadratic cost plus weighted trace term)
        cov_trace_path: Predicted trace(P_{k|k}) over the horizon, empty if not computed
        status: Solver outcome
    """
    states: np.ndarray
    inputs: np.ndarray
    cost: float
    status: SolveStatus
    cov_trace_path: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def feasible(self) -> bool:
        return self.status != SolveStatus.INFEASIBLE

    @property
    def first_input(self) -> np.ndarray:
        return self.inputs[0]

def check_stabilizable(model: LinearModel, tol: float = STABILIZABILITY_TOL) -> None:
    """
    PBH test: rank [A - lambda I, B] = n for every eigenvalue with |lambda| >= 1

    Raises:
        SynthesisError: If an unstable mode is not reachable from the input
    """
    n = model.n
    scale = max(1.0, np.linalg.norm(np.hstack([model.A, model.B]), 2))
    for eigenvalue in np.linalg.eigvals(model.A):
        if abs(eigenvalue) < 1.0 - tol:
            continue
        pencil = np.hstack([model.A - eigenvalue * np.eye(n), model.B.astype(complex)])
        sigma_min = np.linalg.svd(pencil, compute_uv=False)[n - 1]
        if sigma_min <= tol * scale:
            raise SynthesisError(
                f"Model is not stabilizable: mode {eigenvalue:.6g} is not reachable from the input"
            )

def prediction_matrices(model: LinearModel, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Condensed prediction [x_1; ..; x_N] = Phi x_0 + Gamma [u_0; ..; u_{N-1}]

    Returns:
        Tuple of Phi (N n x n) and Gamma (N n x N m)
    """
    n, m = model.n, model.m
    Phi = np.zeros((N * n, n))
    Gamma = np.zeros((N * n, N * m))
    power = np.eye(n)
    for k in range(N):
        power = model.A @ power
        Phi[k * n:(k + 1) * n] = power
    for k in range(N):
        # Column block j of row block k is A^(k-j) B
        block = model.B
        for j in range(k, -1, -1):
            Gamma[k * n:(k + 1) * n, j * m:(j + 1) * m] = block
            block = model.A @ block
    return Phi, Gamma

def simulate_plan(model: LinearModel, x0: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Noise-free states x_0 .. x_N under the planned inputs"""
    inputs = np.asarray(inputs, dtype=float).reshape(-1, model.m)
    states = np.zeros((inputs.shape[0] + 1, model.n))
    states[0] = x0
    for k, u in enumerate(inputs):
        states[k + 1] = model.predict(states[k], u)
    return states

def quadratic_cost(cfg: MpcConfig, states: np.ndarray, inputs: np.ndarray) -> float:
    """sum_{k<N} x_k' Q x_k + u_k' R u_k + x_N' Q_N x_N"""
    stage = np.einsum("ki,ij,kj->", states[:-1], cfg.Q, states[:-1])
    stage += np.einsum("ki,ij,kj->", inputs, cfg.R, inputs)
    return float(stage + states[-1] @ cfg.Q_N @ states[-1])

def constraint_violation(cfg: MpcConfig, states: np.ndarray, inputs: np.ndarray) -> float:
    """
    Largest violation of the input box, the state constraints on x_1 .. x_N
    and the terminal set; 0 for a feasible plan
    """
    violation = 0.0
    if inputs.size:
        violation = max(violation, float(np.max(inputs - cfg.u_max)), float(np.max(cfg.u_min - inputs)))
    planned = states[1:]
    violation = max(violation, float(np.max(planned - cfg.x_max)), float(np.max(cfg.x_min - planned)))
    if cfg.G.shape[0]:
        violation = max(violation, float(np.max(planned @ cfg.G.T - cfg.h)))
    if cfg.terminal == TerminalSet.ZERO:
        violation = max(violation, float(np.max(np.abs(states[-1]))))
    return max(violation, 0.0)

@dataclass(frozen=True)
class CondensedProblem:
    """
    Cost U' H U + 2 f' U + c and constraints A_in U <= b_in, A_eq U = b_eq
    over the stacked input sequence U
    """
    H: np.ndarray
    f: np.ndarray
    c: float
    A_in: np.ndarray
    b_in: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray

    def cost(self, U: np.ndarray) -> float:
        return float(U @ self.H @ U + 2.0 * self.f @ U + self.c)

    def gradient(self, U: np.ndarray) -> np.ndarray:
        return 2.0 * (self.H @ U + self.f)

def condense(cfg: MpcConfig, Phi: np.ndarray, Gamma: np.ndarray, x0: np.ndarray) -> CondensedProblem:
    """Eliminate the states of the horizon in favour of the input sequence"""
    n, N = cfg.n, cfg.N
    Q_bar = linalg.block_diag(*([cfg.Q] * (N - 1) + [cfg.Q_N]))
    R_bar = linalg.block_diag(*([cfg.R] * N)) if cfg.m else np.zeros((0, 0))
    free = Phi @ x0
    H = Gamma.T @ Q_bar @ Gamma + R_bar
    H = 0.5 * (H + H.T)
    f = Gamma.T @ Q_bar @ free
    c = float(x0 @ cfg.Q @ x0 + free @ Q_bar @ free)

    rows, bounds = [], []
    # Terminal equality makes the state constraints on x_N redundant
    last = N - 1 if cfg.terminal == TerminalSet.ZERO else N
    for k in range(last):
        Gk = Gamma[k * n:(k + 1) * n]
        fk = free[k * n:(k + 1) * n]
        upper = np.isfinite(cfg.x_max)
        lower = np.isfinite(cfg.x_min)
        rows += [Gk[upper], -Gk[lower], cfg.G @ Gk]
        bounds += [cfg.x_max[upper] - fk[upper], fk[lower] - cfg.x_min[lower], cfg.h - cfg.G @ fk]
    A_in = np.vstack(rows) if rows else np.zeros((0, Gamma.shape[1]))
    b_in = np.concatenate(bounds) if bounds else np.zeros(0)

    if cfg.terminal == TerminalSet.ZERO:
        A_eq = Gamma[(N - 1) * n:]
        b_eq = -free[(N - 1) * n:]
    else:
        A_eq, b_eq = np.zeros((0, Gamma.shape[1])), np.zeros(0)
    return CondensedProblem(H=H, f=f, c=c, A_in=A_in, b_in=b_in, A_eq=A_eq, b_eq=b_eq)

class BaseMpc(ABC):
    """
    Base class for the receding-horizon controllers

    Attributes:
        cfg: Controller settings
        model: Prediction model currently in use
        logger: Class logger
    """

    def __init__(self, model: LinearModel, cfg: MpcConfig):
        self.cfg = cfg
        self.logger = get_logger(self.__class__.__name__)
        self.model: Optional[LinearModel] = None
        self.update_model(model)

    def update_model(self, model: LinearModel) -> "BaseMpc":
        """
        Rebind the prediction model and rebuild derived matrices

        Raises:
            DimensionError: If the model does not match the weights
            SynthesisError: If the model is not stabilizable
        """
        if (model.n, model.m) != (self.cfg.n, self.cfg.m):
            raise DimensionError(
                f"Model has n={model.n}, m={model.m}; weights expect n={self.cfg.n}, m={self.cfg.m}"
            )
        check_stabilizable(model)
        self.model = model
        self.Phi, self.Gamma = prediction_matrices(model, self.cfg.N)
        self._rebuild()
        self.logger.debug(f"{self.__class__.__name__} bound to a new model")
        return self

    def _rebuild(self) -> None:
        """Hook for solver-specific setup after a model change"""
        pass

    def plan(self, x0, inputs: np.ndarray) -> Tuple[np.ndarray, float, float]:
        """Simulated states, quadratic cost and constraint violation of an input plan"""
        states = simulate_plan(self.model, x0, inputs)
        inputs = inputs.reshape(-1, self.cfg.m)
        return states, quadratic_cost(self.cfg, states, inputs), constraint_violation(self.cfg, states, inputs)

    @abstractmethod
    def solve(self, x0, *args, **kwargs) -> MpcSolution:
        """
        Plan from the measured state

        Args:
            x0: Current state

        Returns:
            MpcSolution
        """
        pass

def controller_update(controller: BaseMpc, model: LinearModel) -> BaseMpc:
    """Rebind a controller to a new model; subsequent solves use it"""
    return controller.update_model(model)
