"""
Closed-loop study: true servo plant, parameter filter, learning trigger
and the nominal/experiment controllers under one of three update policies

etl:        keep the model fixed, test it every step in control mode, run a
            learning experiment when the trigger fires, then adopt the
            filter estimate
permanent:  adopt the filter estimate every step
never:      keep the nominal model
"""
from typing import Optional, Tuple
import numpy as np
from src.config.scenario import EstimatorKind, ExperimentStop, Policy, Scenario
from src.controllers.base import (
    MpcConfig,
    MpcSolution,
    SolveStatus,
    SynthesisError,
    TerminalSet,
    check_stabilizable,
)
from src.controllers.experiment import ExperimentMpc
from src.controllers.nominal import NominalMpc
from src.estimators.base import BaseEstimator, FilterState, NoiseConfig
from src.estimators.kalman import KalmanParameterFilter
from src.estimators.rls import RecursiveLeastSquares
from src.linalg.base import LinearModel, ParamVector
from src.linalg.vectorization import model_to_params, params_to_model, regressor
from src.trigger.learning_trigger import LearningTrigger, TriggerConfig, TriggerDecision
from src.utils.logger import get_logger
from .metrics import MetricsReport, compute_metrics
from .plant import Disturbance, step_plant
from .records import Event, EventKind, Mode, SimulationLog, StepRecord
from .servo import servo_drift_covariance, servo_model

logger = get_logger(__name__)

class SimulationError(RuntimeError):
    """Raised when a run cannot continue; carries the failing step"""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")

def build_mpc_config(sc: Scenario, nu: Optional[float] = None) -> MpcConfig:
    """Controller settings with the torsion and voltage limits of the servo"""
    g = sc.servo.torsion_row()
    limit = sc.mpc.torsion_limit
    return MpcConfig(
        Q=sc.mpc.Q,
        R=sc.mpc.R,
        Q_N=sc.mpc.Q_N,
        N=sc.mpc.horizon,
        nu=sc.mpc.nu if nu is None else nu,
        G=np.vstack([g, -g]),
        h=np.array([limit, limit]),
        u_min=np.array([-sc.mpc.input_limit]),
        u_max=np.array([sc.mpc.input_limit]),
        terminal=TerminalSet(sc.mpc.terminal),
        rollout_includes_drift=sc.mpc.rollout_includes_drift,
        max_iter=sc.mpc.max_iter,
    )

def build_filter_noise(sc: Scenario) -> NoiseConfig:
    """Noise assumed by the filter and the experiment MPC"""
    if sc.noise.drift_diagonal is not None:
        sigma_z = np.diag(sc.noise.drift_diagonal)
    else:
        sigma_z = servo_drift_covariance(
            sc.servo, sc.initial_ratio, sc.Ts, sc.noise.drift_scale, sc.noise.drift_floor
        )
    noise = NoiseConfig(sigma_w=sc.noise.sigma_w, sigma_z=sigma_z, lam=sc.noise.lam)
    return noise.inflated(sc.noise.sigma_w_inflation)

class ClosedLoop:
    """
    Mutable state of one run

    Attributes:
        sc: Scenario
        monitor_trigger: Evaluate and log the trigger under the never and
            permanent policies without acting on it
    """

    def __init__(self, sc: Scenario, monitor_trigger: bool = False):
        self.sc = sc
        self.policy = sc.policy
        self.monitor_trigger = monitor_trigger
        self.rng = np.random.default_rng(sc.seed)
        self.disturbance = Disturbance(sc.noise.sigma_w, sc.noise.distribution)

        self.schedule = {event.step: event.ratio for event in sc.change_schedule}
        self.true_model = servo_model(sc.servo, sc.initial_ratio, sc.Ts)
        self.z_true = model_to_params(self.true_model)

        nominal = self.true_model
        self.model: LinearModel = nominal
        self.z_model: ParamVector = model_to_params(nominal)

        self.noise = build_filter_noise(sc)
        initial = FilterState.initial(self.z_model, sc.filter.p0_scale)
        if sc.filter.estimator == EstimatorKind.RLS:
            self.estimator: BaseEstimator = RecursiveLeastSquares(initial, sc.noise.lam)
        else:
            self.estimator = KalmanParameterFilter(initial, self.noise)

        self.trigger = LearningTrigger(TriggerConfig(alpha=sc.alpha, z_star=self.z_model))
        self.controller = NominalMpc(nominal, build_mpc_config(sc, nu=0.0))
        self.experiment_controller: Optional[ExperimentMpc] = None
        if self.policy == Policy.ETL:
            self.experiment_controller = ExperimentMpc(nominal, build_mpc_config(sc), self.noise)

        self.mode = Mode.CONTROL
        self.experiment_steps = 0
        self.last_plan: Optional[np.ndarray] = None
        self.plan_index = 0
        self.x = np.array(sc.x0, dtype=float)
        self.previous: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self.log = SimulationLog(
            scenario=sc.name, policy=self.policy, seed=sc.seed,
            change_steps=[event.step for event in sc.change_schedule],
        )

    def _event(self, k: int, kind: EventKind, **detail) -> None:
        self.log.events.append(Event(step=k, kind=kind, detail=detail))

    def _adopt_estimate(self, k: int) -> bool:
        """Rebind the controllers to the filter estimate; False if refused"""
        z_hat = self.estimator.z_hat
        candidate = params_to_model(z_hat)
        try:
            check_stabilizable(candidate)
        except SynthesisError as e:
            logger.warning(f"Step {k}: keeping the previous controller: {str(e)}")
            self._event(k, EventKind.SYNTHESIS_REFUSED)
            return False
        self.controller.update_model(candidate)
        if self.experiment_controller is not None:
            self.experiment_controller.update_model(candidate)
        self.model = candidate
        self.z_model = z_hat
        return True

    def _finish_experiment(self, k: int) -> None:
        trace = self.estimator.state.trace
        self._event(k, EventKind.EXPERIMENT_STOP, trace_P=trace, length=self.experiment_steps)
        logger.info(f"Step {k}: experiment finished after {self.experiment_steps} steps, trace(P)={trace:.4e}")
        if self._adopt_estimate(k):
            self.trigger.rebind(self.z_model)
            self._event(k, EventKind.MODEL_UPDATE)
            logger.info(f"Step {k}: model and controller updated")
        self.mode = Mode.CONTROL
        self.experiment_steps = 0

    def _experiment_done(self) -> bool:
        if self.experiment_steps >= self.sc.experiment.length:
            return True
        if self.sc.experiment.stop == ExperimentStop.TRACE_THRESHOLD:
            return self.experiment_steps > 0 and self.estimator.state.trace <= self.sc.experiment.trace_threshold
        return False

    def _choose_input(self, k: int, mode: Mode) -> Tuple[np.ndarray, SolveStatus]:
        if mode == Mode.EXPERIMENT:
            solution: MpcSolution = self.experiment_controller.solve(self.x, self.estimator.P)
        else:
            solution = self.controller.solve(self.x)

        if solution.feasible:
            self.last_plan = solution.inputs
            self.plan_index = 1
            return solution.first_input.copy(), solution.status

        limit = self.sc.mpc.input_limit
        if self.last_plan is not None and self.plan_index < len(self.last_plan):
            u = np.clip(self.last_plan[self.plan_index], -limit, limit)
            self.plan_index += 1
        else:
            u = np.zeros(self.sc.m)
        logger.warning(f"Step {k}: MPC infeasible in {mode.value} mode, applying fallback input {u}")
        self._event(k, EventKind.MPC_FALLBACK, mode=mode.value)
        return u, solution.status

    def step(self, k: int) -> None:
        """Measure, filter, decide and apply one input"""
        if k in self.schedule:
            ratio = self.schedule[k]
            self.true_model = servo_model(self.sc.servo, ratio, self.sc.Ts)
            self.z_true = model_to_params(self.true_model)
            self._event(k, EventKind.PLANT_CHANGE, ratio=ratio)
            logger.info(f"Step {k}: plant load ratio changed to {ratio}")

        if self.previous is not None:
            x_prev, u_prev = self.previous
            self.estimator.update(self.x, regressor(x_prev, u_prev))

        decision: Optional[TriggerDecision] = None
        if self.policy == Policy.ETL:
            if self.mode == Mode.CONTROL:
                decision = self.trigger.evaluate(self.estimator.state)
                if decision.fired:
                    trace = self.estimator.state.trace
                    self._event(k, EventKind.TRIGGER, statistic=decision.statistic, threshold=decision.threshold)
                    self._event(k, EventKind.EXPERIMENT_START, trace_P=trace)
                    logger.info(
                        f"Step {k}: learning trigger fired ({decision.statistic:.2f} > {decision.threshold:.2f}), "
                        f"starting experiment at trace(P)={trace:.4e}"
                    )
                    self.mode = Mode.EXPERIMENT
                # The input of the firing step still comes from the nominal controller
                applied_mode = Mode.CONTROL
            elif self._experiment_done():
                self._finish_experiment(k)
                applied_mode = Mode.CONTROL
            else:
                applied_mode = Mode.EXPERIMENT
                self.experiment_steps += 1
        else:
            if self.policy == Policy.PERMANENT and self.previous is not None:
                self._adopt_estimate(k)
            if self.monitor_trigger:
                self.trigger.rebind(self.z_model)
                decision = self.trigger.evaluate(self.estimator.state)
            applied_mode = Mode.CONTROL

        u, status = self._choose_input(k, applied_mode)
        torsion = float(self.sc.servo.torsion_row() @ self.x)
        self.log.records.append(StepRecord(
            k=k,
            mode=applied_mode,
            x=self.x.copy(),
            u=u.copy(),
            z_true=self.z_true.z.copy(),
            z_model=self.z_model.z.copy(),
            z_hat=self.estimator.z_hat.z.copy(),
            P_diag=np.diag(self.estimator.P).copy(),
            trace_P=self.estimator.state.trace,
            statistic=decision.statistic if decision else float("nan"),
            threshold=decision.threshold if decision else float("nan"),
            fired=bool(decision.fired) if decision else False,
            torsion=torsion,
            state_violation=abs(torsion) > self.sc.mpc.torsion_limit,
            input_violation=bool(np.any(np.abs(u) > self.sc.mpc.input_limit)),
            mpc_status=status,
        ))

        x_next = step_plant(self.true_model, self.x, u, self.rng, self.disturbance)
        self.previous = (self.x, u)
        self.x = x_next

    def run(self) -> SimulationLog:
        logger.info(
            f"Running '{self.sc.name}' with policy {self.policy.value}, seed {self.sc.seed}, "
            f"{self.sc.total_steps} steps"
        )
        for k in range(self.sc.total_steps):
            try:
                self.step(k)
            except SimulationError:
                raise
            except Exception as e:
                logger.error(f"Run failed at step {k}: {str(e)}")
                raise SimulationError(k, str(e)) from e
        logger.info(
            f"Finished '{self.sc.name}' ({self.policy.value}, seed {self.sc.seed}): "
            f"{len(self.log.events_of(EventKind.TRIGGER))} triggers, "
            f"{len(self.log.events_of(EventKind.MODEL_UPDATE))} model updates"
        )
        return self.log

def simulate(sc: Scenario, monitor_trigger: bool = False) -> SimulationLog:
    """Execute one run and return its log"""
    return ClosedLoop(sc, monitor_trigger).run()

def run_scenario(sc: Scenario, monitor_trigger: bool = False) -> Tuple[SimulationLog, MetricsReport]:
    """
    Execute one run and evaluate it

    Args:
        sc: Validated scenario (policy and seed included)
        monitor_trigger: Log the trigger under the never/permanent policies

    Returns:
        Tuple of SimulationLog and MetricsReport

    Raises:
        SimulationError: If a step fails for a reason other than MPC infeasibility
    """
    log = simulate(sc, monitor_trigger)
    return log, compute_metrics(log)
