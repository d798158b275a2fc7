"""
Experiment-design MPC

Adds nu times the predicted trace of the parameter filter covariance to the
nominal cost. The problem is nonconvex in the inputs; it is solved by single
shooting over the input sequence with SLSQP, warm-started from the nominal
solution, and a result is kept only if it is feasible and no worse than the
warm start under the full cost.
"""
from typing import Tuple
import numpy as np
from scipy import optimize
from src.estimators.base import NoiseConfig
from src.linalg.base import LinearModel, as_matrix
from .base import (
    FEASIBILITY_TOL,
    BaseMpc,
    MpcConfig,
    MpcSolution,
    SolveStatus,
    condense,
    simulate_plan,
)
from .covariance import covariance_rollout, trace_path
from .nominal import NominalMpc

FD_STEP = 1e-6
SLSQP_FTOL = 1e-12
SLSQP_ITERATION_LIMIT = 9

class ExperimentMpc(BaseMpc):
    """
    MPC rewarding parameter information along the plan

    Attributes:
        noise: Noise assumptions used in the covariance rollout
        nominal: Nominal controller providing warm starts
    """

    def __init__(self, model: LinearModel, cfg: MpcConfig, noise: NoiseConfig):
        self.noise = noise
        self.nominal = NominalMpc(model, cfg.with_nu(0.0))
        super().__init__(model, cfg)

    def _rebuild(self) -> None:
        if self.nominal.model is not self.model:
            self.nominal.update_model(self.model)

    def trace_term(self, x0: np.ndarray, U: np.ndarray, P0: np.ndarray) -> Tuple[float, np.ndarray]:
        """
        Sum of trace(P_{k+1|k+1}) for k = 0..N-1 and the full trace path
        """
        states = simulate_plan(self.model, x0, U)
        covariances = covariance_rollout(
            states, U.reshape(self.cfg.N, self.cfg.m), P0, self.noise,
            include_drift=self.cfg.rollout_includes_drift,
        )
        path = trace_path(covariances)
        return float(np.sum(path[1:])), path

    def _trace_gradient(self, x0: np.ndarray, U: np.ndarray, P0: np.ndarray) -> np.ndarray:
        # Central differences, step scaled to the input magnitude
        grad = np.zeros_like(U)
        for i in range(U.size):
            step = FD_STEP * max(1.0, abs(U[i]))
            U_plus, U_minus = U.copy(), U.copy()
            U_plus[i] += step
            U_minus[i] -= step
            grad[i] = (self.trace_term(x0, U_plus, P0)[0] - self.trace_term(x0, U_minus, P0)[0]) / (2.0 * step)
        return grad

    def full_cost(self, x0, inputs, P0) -> float:
        """Quadratic cost plus nu times the predicted trace sum"""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        U = np.asarray(inputs, dtype=float).reshape(-1)
        _, cost, _ = self.plan(x0, U)
        if self.cfg.nu == 0.0:
            return cost
        return cost + self.cfg.nu * self.trace_term(x0, U, P0)[0]

    def solve(self, x0, P0) -> MpcSolution:
        """
        Plan an exciting trajectory from x0

        Args:
            x0: Measured state
            P0: Current filter covariance P_{k|k}

        Returns:
            MpcSolution; the nominal solution when nu = 0 or when the local
            search does not improve on it
        """
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        P0 = as_matrix(P0, "P0")
        cfg = self.cfg
        warm = self.nominal.solve(x0)
        if not warm.feasible:
            return warm

        U0 = warm.inputs.reshape(-1)
        warm_trace, warm_path = self.trace_term(x0, U0, P0)
        warm_full = warm.cost + cfg.nu * warm_trace
        warm_solution = MpcSolution(
            states=warm.states, inputs=warm.inputs, cost=warm_full,
            status=warm.status, cov_trace_path=warm_path,
        )
        if cfg.nu == 0.0:
            return warm_solution

        problem = condense(cfg, self.Phi, self.Gamma, x0)

        def objective(U):
            return problem.cost(U) + cfg.nu * self.trace_term(x0, U, P0)[0]

        def gradient(U):
            return problem.gradient(U) + cfg.nu * self._trace_gradient(x0, U, P0)

        constraints = []
        if problem.A_in.shape[0]:
            constraints.append({
                "type": "ineq",
                "fun": lambda U: problem.b_in - problem.A_in @ U,
                "jac": lambda U: -problem.A_in,
            })
        if problem.A_eq.shape[0]:
            constraints.append({
                "type": "eq",
                "fun": lambda U: problem.A_eq @ U - problem.b_eq,
                "jac": lambda U: problem.A_eq,
            })
        bounds = optimize.Bounds(np.tile(cfg.u_min, cfg.N), np.tile(cfg.u_max, cfg.N))

        result = optimize.minimize(
            objective, U0, jac=gradient, method="SLSQP", bounds=bounds,
            constraints=constraints,
            options={"maxiter": cfg.max_iter, "ftol": SLSQP_FTOL},
        )
        hit_cap = result.status == SLSQP_ITERATION_LIMIT

        U = np.clip(result.x, bounds.lb, bounds.ub)
        states, cost, violation = self.plan(x0, U)
        trace_sum, path = self.trace_term(x0, U, P0)
        full = cost + cfg.nu * trace_sum
        if violation > FEASIBILITY_TOL or not np.isfinite(full) or full > warm_full:
            self.logger.debug(
                f"Experiment plan rejected (violation {violation:.2e}, cost {full:.6g} vs warm {warm_full:.6g}): "
                f"{result.message}"
            )
            if hit_cap:
                return MpcSolution(
                    states=warm.states, inputs=warm.inputs, cost=warm_full,
                    status=SolveStatus.MAX_ITERATIONS, cov_trace_path=warm_path,
                )
            return warm_solution

        return MpcSolution(
            states=states, inputs=U.reshape(cfg.N, cfg.m), cost=full,
            status=SolveStatus.MAX_ITERATIONS if hit_cap else SolveStatus.SOLVED,
            cov_trace_path=path,
        )

def experiment_mpc_solve(model: LinearModel, x0, P0, noise: NoiseConfig, cfg: MpcConfig) -> MpcSolution:
    """One-shot experiment solve; builds a controller for the model"""
    return ExperimentMpc(model, cfg, noise).solve(x0, P0)
