"""Closed-loop simulation: plant integration, scenarios, and recording.

The plant uses the same RK4 integrator as the controller's prediction
model (perfect-model setting), which isolates the effect of the weight
scheduling from robustness confounds. Goal poses can be revealed late
and perturbed with per-tick Gaussian noise to mimic noisy goal
detection.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from dockmpc import model as vm
from dockmpc.controller import Controller, Strategy
from dockmpc.frenet import frenet_errors
from dockmpc.metrics import count_direction_changes
from dockmpc.path import (BEYOND_END_SLACK, SAMPLE_SPACING, Corridor,
                          GoalPose, ReferencePath,
                          build_path, corridor_bounds, eval_reference,
                          project_goal, project_position)
from dockmpc.weights import WeightConfig

SETTLE_TIME = 1.0          # keep simulating this long after goal reach [s]
PREDICTION_TOL = 1e-9      # plant vs one-step controller prediction [m]

DEFAULT_POS_TOL = 0.05
DEFAULT_HEADING_TOL = 0.02
DEFAULT_VEL_TOL = 0.02
DEFAULT_SIGMA_XY = 0.02
DEFAULT_SIGMA_PHI = 0.01


class ScenarioInvalid(ValueError):
    """Scenario field failed validation; message names the field."""


@dataclass(frozen=True)
class GoalSpec:
    x: float
    y: float
    phi: float
    sigma_xy: float = 0.0
    sigma_phi: float = 0.0
    reveal_time: float = 0.0

    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.phi)


@dataclass
class Scenario:
    name: str
    waypoints: list                      # list of legs, each a list of (x, y)
    directions: list                     # +1 / -1 per leg
    corridor_theta: list | None = None   # breakpoints; None = constant corridor
    corridor_lower: list | None = None
    corridor_upper: list | None = None
    corridor_half_width: float = 1.5
    initial_state: list | None = None    # 6 values; default: path start, at rest
    goal: GoalSpec | None = None
    strategy: Strategy = Strategy.UNIFIED
    duration: float = 60.0
    pos_tol: float = DEFAULT_POS_TOL
    heading_tol: float = DEFAULT_HEADING_TOL
    vel_tol: float = DEFAULT_VEL_TOL
    weights: WeightConfig = field(default_factory=WeightConfig)
    model: vm.ModelParams = field(default_factory=vm.ModelParams)
    horizon: int = 70
    staging_offset: float = 8.0
    switch_distance: float = 11.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.strategy, Strategy):
            try:
                self.strategy = Strategy(self.strategy)
            except ValueError:
                raise ScenarioInvalid(f"strategy: unknown '{self.strategy}'")

    def validate(self) -> None:
        if self.duration <= 0.0:
            raise ScenarioInvalid("duration: must be > 0")
        for name in ("pos_tol", "heading_tol", "vel_tol"):
            if getattr(self, name) <= 0.0:
                raise ScenarioInvalid(f"{name}: must be > 0")
        if self.horizon < 2:
            raise ScenarioInvalid("horizon: must be >= 2")
        if len(self.waypoints) != len(self.directions):
            raise ScenarioInvalid("directions: need one entry per leg")
        bp = (self.corridor_theta, self.corridor_lower, self.corridor_upper)
        if any(v is not None for v in bp) and any(v is None for v in bp):
            raise ScenarioInvalid(
                "corridor_theta/corridor_lower/corridor_upper: all or none")
        if self.corridor_half_width <= 0.0:
            raise ScenarioInvalid("corridor_half_width: must be > 0")
        if self.initial_state is not None and len(self.initial_state) != 6:
            raise ScenarioInvalid("initial_state: needs 6 values")
        if self.goal is not None:
            if self.goal.sigma_xy < 0.0 or self.goal.sigma_phi < 0.0:
                raise ScenarioInvalid("goal: noise sigmas must be >= 0")
            if self.goal.reveal_time < 0.0:
                raise ScenarioInvalid("goal.reveal_time: must be >= 0")

    def build(self) -> tuple[ReferencePath, Corridor]:
        path = build_path(self.waypoints, self.directions)
        if self.corridor_theta is not None:
            corridor = Corridor(np.asarray(self.corridor_theta, dtype=float),
                                np.asarray(self.corridor_lower, dtype=float),
                                np.asarray(self.corridor_upper, dtype=float))
        else:
            corridor = Corridor.constant(self.corridor_half_width,
                                         path.theta_end)
        return path, corridor


@dataclass
class RunRecord:
    """Time series of one closed-loop run; one row per control period."""

    name: str
    strategy: str
    seed: int
    dt: float
    wheelbase: float
    t: np.ndarray                 # (n,)
    states: np.ndarray            # (n, 6)
    inputs: np.ndarray            # (n, 3); zeros on the final row
    e_l: np.ndarray               # (n,)
    e_c: np.ndarray               # (n,)
    modes: list                   # (n,) "C"/"X" of the first horizon stage
    q_c_eff: np.ndarray           # (n,)
    q_l_eff: np.ndarray           # (n,)
    gamma_eff: np.ndarray         # (n,)
    violation: np.ndarray         # (n,) corridor violation at the plant pose [m]
    theta_0: np.ndarray           # (n,)
    iterations: np.ndarray        # (n,)
    kkt: np.ndarray               # (n,)
    degraded: np.ndarray          # (n,) bool
    goal_reach_time: float | None
    direction_changes: int
    goal_true: tuple | None

    @property
    def reached(self) -> bool:
        return self.goal_reach_time is not None


def corridor_violation(path: ReferencePath, corridor: Corridor,
                       x: float, y: float) -> float:
    """Distance outside the corridor at the projected path position.

    Zero beyond the path end: the corridor only covers the path, and a
    goal may legitimately lie past it.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        theta_p = project_position(path, x, y)
    if theta_p >= path.theta_end - SAMPLE_SPACING:
        xe, ye, pe = path.end_pose()
        travel = path.segments[-1].direction
        if travel * ((x - xe) * np.cos(pe) + (y - ye) * np.sin(pe)) > BEYOND_END_SLACK:
            return 0.0
    xr, yr, phir = eval_reference(path, theta_p)
    lateral = -(x - xr) * np.sin(phir) + (y - yr) * np.cos(phir)
    lo, hi = corridor_bounds(corridor, theta_p)
    return max(0.0, lateral - hi, lo - lateral)


def _wrap(d: float) -> float:
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _goal_target(scenario: Scenario, path: ReferencePath):
    if scenario.goal is not None:
        return scenario.goal.pose()
    return path.end_pose()


def _at_target(state: np.ndarray, target, scenario: Scenario) -> bool:
    dx = state[vm.IX] - target[0]
    dy = state[vm.IY] - target[1]
    return (np.hypot(dx, dy) <= scenario.pos_tol
            and abs(_wrap(state[vm.IPHI] - target[2])) <= scenario.heading_tol
            and abs(state[vm.IV]) <= scenario.vel_tol)


def simulate(scenario: Scenario, seed: int = 0) -> RunRecord:
    """Run the closed loop until goal-reach + settle or the duration limit."""
    scenario.validate()
    path, corridor = scenario.build()
    rng = np.random.default_rng(seed)
    dt = scenario.model.dt

    if scenario.initial_state is not None:
        state = np.asarray(scenario.initial_state, dtype=float)
    else:
        state = np.zeros(vm.STATE_DIM)
        state[:3] = path.start_pose()

    controller = Controller(
        path, corridor, scenario.weights, scenario.model,
        strategy=scenario.strategy, N=scenario.horizon,
        staging_offset=scenario.staging_offset,
        switch_distance=scenario.switch_distance,
    )
    target = _goal_target(scenario, path)

    rows: dict = {k: [] for k in (
        "t", "state", "input", "e_l", "e_c", "mode", "q_c", "q_l", "gamma",
        "viol", "theta_0", "iters", "kkt", "degraded")}
    goal_reach_time: float | None = None

    n_ticks = int(round(scenario.duration / dt))
    for tick in range(n_ticks):
        t = tick * dt
        if goal_reach_time is None and _at_target(state, target, scenario):
            goal_reach_time = t
        if goal_reach_time is not None and t >= goal_reach_time + SETTLE_TIME:
            break

        goal_now: GoalPose | None = None
        if scenario.goal is not None and t >= scenario.goal.reveal_time:
            gx, gy, gphi = scenario.goal.pose()
            if scenario.goal.sigma_xy > 0.0 or scenario.goal.sigma_phi > 0.0:
                gx += rng.normal(0.0, scenario.goal.sigma_xy)
                gy += rng.normal(0.0, scenario.goal.sigma_xy)
                gphi += rng.normal(0.0, scenario.goal.sigma_phi)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                goal_now = project_goal(path, (gx, gy, gphi))

        u, solution, info = controller.tick(state, goal_now)
        e = frenet_errors(state, path)
        rows["t"].append(t)
        rows["state"].append(state.copy())
        rows["input"].append(u.as_array())
        rows["e_l"].append(e.e_l)
        rows["e_c"].append(e.e_c)
        rows["mode"].append(info.schedule.modes[0].value)
        rows["q_c"].append(info.schedule.q_c_eff[0])
        rows["q_l"].append(info.schedule.q_l_eff[0])
        rows["gamma"].append(info.schedule.gamma_eff[0])
        rows["viol"].append(corridor_violation(path, corridor,
                                               state[vm.IX], state[vm.IY]))
        rows["theta_0"].append(info.theta_0)
        rows["iters"].append(solution.iterations)
        rows["kkt"].append(solution.kkt_residual)
        rows["degraded"].append(info.degraded)

        next_state = vm.discretize_rk4(state, u.as_array(), scenario.model)
        if not info.degraded:
            defect = float(np.abs(next_state - solution.states[1]).max())
            if defect > PREDICTION_TOL:
                raise AssertionError(
                    f"plant/prediction mismatch {defect:.2e} at t={t:.1f}")
        state = next_state

    # final state row (no input applied)
    t_final = len(rows["t"]) * dt
    if goal_reach_time is None and _at_target(state, target, scenario):
        goal_reach_time = t_final
    e = frenet_errors(state, path)
    rows["t"].append(t_final)
    rows["state"].append(state.copy())
    rows["input"].append(np.zeros(vm.INPUT_DIM))
    rows["e_l"].append(e.e_l)
    rows["e_c"].append(e.e_c)
    rows["mode"].append(rows["mode"][-1] if len(rows["mode"]) else "C")
    rows["q_c"].append(rows["q_c"][-1] if len(rows["q_c"]) else 0.0)
    rows["q_l"].append(rows["q_l"][-1] if len(rows["q_l"]) else 0.0)
    rows["gamma"].append(rows["gamma"][-1] if len(rows["gamma"]) else 0.0)
    rows["viol"].append(corridor_violation(path, corridor,
                                           state[vm.IX], state[vm.IY]))
    rows["theta_0"].append(controller.base_progress(state))
    rows["iters"].append(0)
    rows["kkt"].append(0.0)
    rows["degraded"].append(False)

    states = np.asarray(rows["state"])
    return RunRecord(
        name=scenario.name,
        strategy=scenario.strategy.value,
        seed=seed,
        dt=dt,
        wheelbase=scenario.model.wheelbase,
        t=np.asarray(rows["t"]),
        states=states,
        inputs=np.asarray(rows["input"]),
        e_l=np.asarray(rows["e_l"]),
        e_c=np.asarray(rows["e_c"]),
        modes=rows["mode"],
        q_c_eff=np.asarray(rows["q_c"]),
        q_l_eff=np.asarray(rows["q_l"]),
        gamma_eff=np.asarray(rows["gamma"]),
        violation=np.asarray(rows["viol"]),
        theta_0=np.asarray(rows["theta_0"]),
        iterations=np.asarray(rows["iters"]),
        kkt=np.asarray(rows["kkt"]),
        degraded=np.asarray(rows["degraded"], dtype=bool),
        goal_reach_time=goal_reach_time,
        direction_changes=count_direction_changes(states[:, vm.IV]),
        goal_true=scenario.goal.pose() if scenario.goal else None,
    )


def make_paper_scenarios() -> list[Scenario]:
    """Desk-scale stand-ins for the evaluation scenarios.

    Geometry is qualitative: the original corridors/paths are not
    published, so these reproduce the structure (cusp path, in-corridor
    goal, beyond-the-end goal with narrowed corridor), not the numbers.
    """
    desk = {"scale": "desk", "geometry": "qualitative stand-in"}

    cusp_follow = Scenario(
        name="cusp-follow",
        waypoints=[
            [(0.0, 0.0), (4.0, 0.0), (7.0, 0.804),
             (9.196, 3.0), (10.0, 6.0)],
            [(10.0, 6.0), (10.0, 3.5), (10.0, 1.0)],
        ],
        directions=[1, -1],
        corridor_half_width=1.5,
        goal=None,
        duration=60.0,
        horizon=50,  # short path; a 5 s lookahead covers each leg
        metadata=dict(desk),
    )

    scenario_1 = Scenario(
        name="scenario-1",
        waypoints=[[(0.0, 0.0), (20.0, 0.0), (40.0, 0.0)]],
        directions=[1],
        corridor_half_width=1.5,
        goal=GoalSpec(34.0, 1.3, 0.0, sigma_xy=DEFAULT_SIGMA_XY,
                      sigma_phi=DEFAULT_SIGMA_PHI, reveal_time=2.0),
        duration=120.0,
        metadata=dict(desk),
    )

    scenario_2 = Scenario(
        name="scenario-2",
        waypoints=[[(0.0, 0.0), (15.0, 0.0), (30.0, 0.0)]],
        directions=[1],
        corridor_theta=[0.0, 25.0, 30.0],
        corridor_lower=[-1.5, -1.5, -0.6],
        corridor_upper=[1.5, 1.5, 0.6],
        goal=GoalSpec(36.5, 1.5, 0.0, sigma_xy=DEFAULT_SIGMA_XY,
                      sigma_phi=DEFAULT_SIGMA_PHI, reveal_time=2.0),
        duration=120.0,
        metadata=dict(desk),
    )
    return [cusp_follow, scenario_1, scenario_2]
