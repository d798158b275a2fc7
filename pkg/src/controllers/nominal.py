"""
Nominal MPC: quadratic regulator with zero terminal constraint

Constrained instances are solved as a sparse QP over
(x_0, .., x_N, u_0, .., u_{N-1}) with OSQP; only the initial-state bounds
change between solves. Instances without inequality constraints are solved
exactly through the KKT system of the equality-constrained QP.
"""
import numpy as np
import osqp
from scipy import linalg, sparse
from src.linalg.base import LinearModel
from .base import (
    FEASIBILITY_TOL,
    BaseMpc,
    MpcConfig,
    MpcSolution,
    SolveStatus,
    TerminalSet,
    condense,
)

OSQP_SETTINGS = {
    "eps_abs": 1e-9,
    "eps_rel": 1e-9,
    "eps_prim_inf": 1e-9,
    "eps_dual_inf": 1e-9,
    "max_iter": 20000,
    "polish": True,
    "warm_start": False,
    "verbose": False,
}

def kkt_solve(problem) -> tuple:
    """
    Minimize U' H U + 2 f' U subject to A_eq U = b_eq

    Returns:
        Tuple of the minimizer and the equality residual
    """
    size = problem.H.shape[0]
    p = problem.A_eq.shape[0]
    kkt = np.block([
        [2.0 * problem.H, problem.A_eq.T],
        [problem.A_eq, np.zeros((p, p))],
    ])
    rhs = np.concatenate([-2.0 * problem.f, problem.b_eq])
    solution = linalg.lstsq(kkt, rhs)[0]
    U = solution[:size]
    residual = float(np.max(np.abs(problem.A_eq @ U - problem.b_eq))) if p else 0.0
    return U, residual

class NominalMpc(BaseMpc):
    """
    Certainty-equivalent MPC on the current model

    Attributes:
        cfg: Controller settings (nu is ignored)
        model: Prediction model
    """

    def __init__(self, model: LinearModel, cfg: MpcConfig):
        self._prob = None
        super().__init__(model, cfg)

    def _rebuild(self) -> None:
        self._prob = None
        if self.cfg.has_inequalities:
            self._setup_qp()

    def _setup_qp(self) -> None:
        cfg, A, B = self.cfg, self.model.A, self.model.B
        n, m, N = cfg.n, cfg.m, cfg.N
        n_x = (N + 1) * n

        P = sparse.block_diag([
            sparse.kron(sparse.eye(N), cfg.Q),
            cfg.Q_N,
            sparse.kron(sparse.eye(N), cfg.R),
        ], format="csc") * 2.0
        q = np.zeros(n_x + N * m)

        # x_{k+1} = A x_k + B u_k and x_0 = current state
        Ax = sparse.kron(sparse.eye(N + 1), -sparse.eye(n)) + sparse.kron(sparse.eye(N + 1, k=-1), A)
        Bu = sparse.kron(sparse.vstack([sparse.csc_matrix((1, N)), sparse.eye(N)]), B)
        A_eq = sparse.hstack([Ax, Bu])

        # State bounds: none on x_0, box on x_1..x_{N-1}, terminal set on x_N
        x_lower = np.concatenate([np.full(n, -np.inf), np.tile(cfg.x_min, N)])
        x_upper = np.concatenate([np.full(n, np.inf), np.tile(cfg.x_max, N)])
        if cfg.terminal == TerminalSet.ZERO:
            x_lower[N * n:] = 0.0
            x_upper[N * n:] = 0.0
        A_x = sparse.hstack([sparse.eye(n_x), sparse.csc_matrix((n_x, N * m))])

        blocks = [A_eq, A_x]
        lower = [np.zeros(n_x), x_lower]
        upper = [np.zeros(n_x), x_upper]

        p = cfg.G.shape[0]
        if p:
            blocks.append(sparse.hstack([sparse.kron(sparse.eye(N + 1), cfg.G),
                                         sparse.csc_matrix(((N + 1) * p, N * m))]))
            lower.append(np.full((N + 1) * p, -np.inf))
            upper.append(np.concatenate([np.full(p, np.inf), np.tile(cfg.h, N)]))

        blocks.append(sparse.hstack([sparse.csc_matrix((N * m, n_x)), sparse.eye(N * m)]))
        lower.append(np.tile(cfg.u_min, N))
        upper.append(np.tile(cfg.u_max, N))

        self._A = sparse.vstack(blocks, format="csc")
        self._l = np.concatenate(lower)
        self._u = np.concatenate(upper)
        self._n_x = n_x

        self._prob = osqp.OSQP()
        self._prob.setup(P, q, self._A, self._l, self._u, **OSQP_SETTINGS)

    def solve(self, x0) -> MpcSolution:
        """
        Solve the regulation problem from x0

        Args:
            x0: Measured state

        Returns:
            MpcSolution with status solved, max-iterations or infeasible
        """
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if self._prob is None:
            return self._solve_dense(x0)
        return self._solve_sparse(x0)

    def _solve_dense(self, x0: np.ndarray) -> MpcSolution:
        problem = condense(self.cfg, self.Phi, self.Gamma, x0)
        U, residual = kkt_solve(problem)
        inputs = U.reshape(self.cfg.N, self.cfg.m)
        states, cost, violation = self.plan(x0, inputs)
        status = SolveStatus.SOLVED
        if residual > FEASIBILITY_TOL or violation > FEASIBILITY_TOL:
            self.logger.debug(f"Terminal set unreachable from x0 (residual {residual:.3e})")
            status = SolveStatus.INFEASIBLE
        return MpcSolution(states=states, inputs=inputs, cost=cost, status=status)

    def _solve_sparse(self, x0: np.ndarray) -> MpcSolution:
        cfg, n = self.cfg, self.cfg.n
        self._l[:n] = -x0
        self._u[:n] = -x0
        self._prob.update(l=self._l, u=self._u)
        result = self._prob.solve()
        status_text = result.info.status

        if "infeasible" in status_text or result.x is None or not np.all(np.isfinite(result.x)):
            self.logger.debug(f"OSQP reports '{status_text}' from x0={x0}")
            return self._infeasible(x0)

        inputs = result.x[self._n_x:].reshape(cfg.N, cfg.m)
        inputs = np.clip(inputs, cfg.u_min, cfg.u_max)
        states, cost, violation = self.plan(x0, inputs)
        if violation > FEASIBILITY_TOL:
            self.logger.debug(f"OSQP plan violates constraints by {violation:.3e} ('{status_text}')")
            return self._infeasible(x0)
        status = SolveStatus.SOLVED if status_text.startswith("solved") else SolveStatus.MAX_ITERATIONS
        return MpcSolution(states=states, inputs=inputs, cost=cost, status=status)

    def _infeasible(self, x0: np.ndarray) -> MpcSolution:
        inputs = np.zeros((self.cfg.N, self.cfg.m))
        states, cost, _ = self.plan(x0, inputs)
        return MpcSolution(states=states, inputs=inputs, cost=cost, status=SolveStatus.INFEASIBLE)

def nominal_mpc_solve(model: LinearModel, x0, cfg: MpcConfig) -> MpcSolution:
    """One-shot nominal solve; builds a controller for the model"""
    return NominalMpc(model, cfg).solve(x0)
