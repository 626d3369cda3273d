"""Receding-horizon controller with strategy variants.

Each tick projects the vehicle position onto the path to get the base
progress theta_0, rebuilds the per-stage weight schedule from the
warm-start progress trajectory, shifts the previous solution by one
stage as the warm start, solves the horizon problem, and applies the
first input.

Strategies:

* Unified: one problem throughout; the weight schedule handles segment
  ends, in-corridor goals and beyond-the-end goals.
* Separated: contouring control up to a staging pose, full stop there,
  then a pure Cartesian goal-pose problem (corridor dropped).
* Switched: hot-swaps to the pure Cartesian problem the first tick the
  base progress passes theta_e - switch_distance, without stopping; the
  corridor drops mid-drive, which is the known unsafe behavior this
  baseline exists to reproduce.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from dockmpc import model as vm
from dockmpc import ocp
from dockmpc.path import (Corridor, GoalLocation, GoalPose, ReferencePath,
                          eval_reference, project_position, segment_end)
from dockmpc.weights import (ObjectiveMode, WeightConfig, WeightSchedule,
                             build_schedule, path_end_contouring_weight)

STOP_SPEED = 0.02        # |v| below which the plant counts as stopped [m/s]
STAGING_RADIUS = 0.3     # distance to the staging pose for the separated handover [m]
TICK_SQP_ITER = 10       # per-tick SQP cap; warm starts converge in a few steps


class Strategy(enum.Enum):
    UNIFIED = "unified"
    SEPARATED = "separated"
    SWITCHED = "switched"


class Phase(enum.Enum):
    FOLLOW_PATH = "follow_path"
    GOAL_APPROACH = "goal_approach"


class NotInitialized(RuntimeError):
    """tick was called on a controller without a reference path."""


@dataclass
class TickInfo:
    """Per-tick diagnostics next to the returned input."""

    theta_0: float
    phase: Phase
    degraded: bool
    schedule: WeightSchedule
    corridor_active: bool


class Controller:
    def __init__(self, path: ReferencePath, corridor: Corridor | None,
                 cfg: WeightConfig, params: vm.ModelParams,
                 strategy: Strategy = Strategy.UNIFIED, N: int = 70,
                 staging_offset: float = 8.0, switch_distance: float = 11.0):
        self.path = path
        self.corridor = corridor
        self.cfg = cfg
        self.params = params
        self.strategy = strategy
        self.N = int(N)
        self.staging_offset = float(staging_offset)
        self.switch_distance = float(switch_distance)

        self.phase = Phase.FOLLOW_PATH
        self.last_solution: ocp.TrajectorySolution | None = None
        self.tick_count = 0
        self.degraded_ticks = 0

    # -- progress projection ------------------------------------------------

    def base_progress(self, plant_state: np.ndarray) -> float:
        """theta_0: projection of the vehicle position, clamped to [0, theta_e]."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # near-ties resolve to larger theta
            theta = project_position(self.path, float(plant_state[vm.IX]),
                                     float(plant_state[vm.IY]))
        return float(np.clip(theta, 0.0, self.path.theta_end))

    # -- staging pose for the separated baseline ----------------------------

    def staging_theta(self, goal: GoalPose | None) -> float:
        if goal is not None and goal.location is GoalLocation.INSIDE_CORRIDOR:
            return max(0.0, goal.theta_g - self.staging_offset)
        return self.path.theta_end

    # -- schedules ----------------------------------------------------------

    def _follow_schedule(self, theta_traj: np.ndarray,
                         staging: float) -> WeightSchedule:
        """Contouring schedule that treats the staging progress as the end."""
        N = len(theta_traj)
        q_c_eff = np.empty(N)
        for k, th in enumerate(theta_traj):
            end = min(segment_end(self.path, th), staging)
            q_c_eff[k] = path_end_contouring_weight(th, end, self.cfg)
        terminal_ref = np.zeros(6)
        terminal_ref[:3] = eval_reference(self.path, staging)
        sched = WeightSchedule(
            q_l_eff=np.full(N, self.cfg.q_l),
            q_c_eff=q_c_eff,
            gamma_eff=np.full(N, self.cfg.gamma),
            frenet_active=np.ones(N, dtype=bool),
            modes=[ObjectiveMode.CONTOURING] * N,
            q_N_eff=self.cfg.q_N_vec(),
            terminal_ref=terminal_ref,
            theta_upper=staging,
        )
        sched.validate(self.cfg)
        return sched

    def _cartesian_schedule(self, goal: GoalPose | None) -> WeightSchedule:
        """Pure goal-pose schedule: every stage Cartesian, corridor off."""
        N = self.N
        if goal is not None:
            ref = np.array([goal.x, goal.y, goal.phi, 0.0, 0.0, 0.0])
        else:
            ref = np.zeros(6)
            ref[:3] = eval_reference(self.path, self.path.theta_end)
        sched = WeightSchedule(
            q_l_eff=np.zeros(N),
            q_c_eff=np.zeros(N),
            gamma_eff=np.zeros(N),
            frenet_active=np.zeros(N, dtype=bool),
            modes=[ObjectiveMode.CARTESIAN] * N,
            q_N_eff=self.cfg.q_N_e_vec(),
            terminal_ref=ref,
            theta_upper=None,
        )
        sched.validate(self.cfg)
        return sched

    # -- phase rules --------------------------------------------------------

    def _update_phase(self, plant_state: np.ndarray, theta_0: float,
                      goal: GoalPose | None) -> None:
        if self.strategy is Strategy.SEPARATED and self.phase is Phase.FOLLOW_PATH:
            staging = self.staging_theta(goal)
            sx, sy, _ = eval_reference(self.path, staging)
            dist = float(np.hypot(plant_state[vm.IX] - sx,
                                  plant_state[vm.IY] - sy))
            if abs(plant_state[vm.IV]) < STOP_SPEED and dist < STAGING_RADIUS:
                self.phase = Phase.GOAL_APPROACH
        elif self.strategy is Strategy.SWITCHED and self.phase is Phase.FOLLOW_PATH:
            if theta_0 > self.path.theta_end - self.switch_distance:
                self.phase = Phase.GOAL_APPROACH

    # -- main loop ----------------------------------------------------------

    def tick(self, plant_state, goal: GoalPose | None = None
             ) -> tuple[vm.ControlInput, ocp.TrajectorySolution, TickInfo]:
        if self.path is None:
            raise NotInitialized("controller has no reference path")
        x0 = np.asarray(plant_state, dtype=float)
        if x0.shape != (vm.STATE_DIM,):
            x0 = vm.VehicleState.from_array(x0).as_array()

        theta_0 = self.base_progress(x0)
        self._update_phase(x0, theta_0, goal)

        # warm start: shift by one stage, repeat the terminal stage
        if self.last_solution is not None:
            U_ws = np.vstack([self.last_solution.inputs[1:],
                              self.last_solution.inputs[-1]])
        else:
            U_ws = np.zeros((self.N, vm.INPUT_DIM))
        lo, hi = self.params.input_bounds()
        U_ws = np.clip(U_ws, lo, hi)
        X_ws = vm.rollout_horizon(x0, U_ws, self.params)
        theta_traj = X_ws[:self.N, vm.ITHETA]

        cartesian_phase = (self.strategy is not Strategy.UNIFIED
                           and self.phase is Phase.GOAL_APPROACH)
        if cartesian_phase:
            schedule = self._cartesian_schedule(goal)
        elif self.strategy is Strategy.UNIFIED:
            schedule = build_schedule(theta_traj, theta_0, self.path, goal,
                                      self.cfg)
        elif self.strategy is Strategy.SEPARATED:
            schedule = self._follow_schedule(theta_traj,
                                             self.staging_theta(goal))
        else:  # switched: follow the whole path until the hot swap fires
            schedule = self._follow_schedule(theta_traj, self.path.theta_end)

        use_corridor = self.corridor is not None and bool(
            np.any(schedule.frenet_active))
        problem = ocp.HorizonProblem(
            N=self.N, params=self.params, x0=x0, schedule=schedule,
            cfg=self.cfg, path=self.path,
            corridor=self.corridor if use_corridor else None,
        )
        warm = None
        if self.last_solution is not None:
            warm = ocp.TrajectorySolution(
                states=X_ws, inputs=U_ws, cost=np.nan, kkt_residual=np.nan,
                iterations=0, stage_modes=schedule.modes, slack_max=0.0)
        degraded = False
        try:
            solution = ocp.solve(problem, warm_start=warm,
                                 max_iter=TICK_SQP_ITER)
        except ocp.SolveFailed:
            degraded = True
            self.degraded_ticks += 1
            solution = ocp.TrajectorySolution(
                states=X_ws, inputs=U_ws, cost=np.nan, kkt_residual=np.inf,
                iterations=0, stage_modes=schedule.modes, slack_max=0.0)

        self.last_solution = solution
        self.tick_count += 1
        info = TickInfo(theta_0=theta_0, phase=self.phase, degraded=degraded,
                        schedule=schedule, corridor_active=use_corridor)
        return vm.ControlInput.from_array(solution.inputs[0]), solution, info
