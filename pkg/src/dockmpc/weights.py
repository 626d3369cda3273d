"""Per-stage weight scheduling: sigmoid blending and the objective switch.

Three regimes, selected per solve from the goal descriptor:

* no goal: the contouring weight is raised toward each segment end
  (cusps and the path end) so those points are reached precisely;
* goal inside the corridor: contouring weight and progress reward fade
  out on approach to the projected goal position, the terminal goal-pose
  weight blends in as the robot base nears the goal;
* goal beyond the path end: stages past the path end switch to a pure
  Cartesian goal-pose objective (hard case split, not a blend), with
  all path-relative penalties and constraints deactivated there.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from dockmpc.path import GoalLocation, GoalPose, ReferencePath, segment_end


class InvalidSchedule(ValueError):
    """A schedule invariant would be violated; indicates config corruption."""


class ObjectiveMode(enum.Enum):
    CONTOURING = "C"
    CARTESIAN = "X"


def _vec(v, n) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"expected a {n}-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class WeightConfig:
    """Cost weights; defaults match the evaluation parameter set."""

    q: tuple = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)          # state weights
    q_N: tuple = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)        # baseline terminal weights
    q_N_e: tuple = (1e4, 1e4, 1e4, 0.0, 0.0, 0.0)      # terminal weights at goal engagement
    r: tuple = (1e3, 100.0, 0.0)                       # input weights
    q_l: float = 1e3                                   # lag weight
    q_c: float = 1.0                                   # contouring weight
    q_theta_dot: float = 0.0                           # third slot, unused by design
    q_c_e: float = 100.0                               # raised contouring weight at segment ends
    gamma: float = -100.0                              # progress reward (<= 0)
    alpha: float = 1.0                                 # sigmoid steepness
    beta: float = 10.0                                 # sigmoid center [m]

    def __post_init__(self):
        if self.gamma > 0.0:
            raise ValueError("gamma must be <= 0 (a reward)")
        if self.alpha <= 0.0 or self.beta < 0.0:
            raise ValueError("alpha must be > 0 and beta >= 0")
        if self.q_c_e < self.q_c:
            raise ValueError("q_c_e must be >= q_c")
        for name in ("q", "q_N", "q_N_e"):
            if np.any(_vec(getattr(self, name), 6) < 0.0):
                raise ValueError(f"{name} entries must be nonnegative")
        if np.any(_vec(self.r, 3) < 0.0) or min(self.q_l, self.q_c) < 0.0:
            raise ValueError("input/Frenet weights must be nonnegative")

    def q_vec(self) -> np.ndarray:
        return _vec(self.q, 6)

    def q_N_vec(self) -> np.ndarray:
        return _vec(self.q_N, 6)

    def q_N_e_vec(self) -> np.ndarray:
        return _vec(self.q_N_e, 6)

    def r_vec(self) -> np.ndarray:
        return _vec(self.r, 3)


def sigmoid(epsilon: float, alpha: float, beta: float) -> float:
    """1 / (1 + exp(alpha * (epsilon - beta))).

    Approaches 1 for epsilon small/negative (at or past the event) and 0
    far away from it.
    """
    z = np.clip(alpha * (epsilon - beta), -500.0, 500.0)
    return float(1.0 / (1.0 + np.exp(z)))


def path_end_contouring_weight(theta_k: float, theta_e_local: float,
                               cfg: WeightConfig) -> float:
    """Blend the contouring weight toward its raised value near a segment end."""
    sig = sigmoid(theta_e_local - theta_k, cfg.alpha, cfg.beta)
    return sig * cfg.q_c_e + (1.0 - sig) * cfg.q_c


def goal_inside_weights(theta_k: float, theta_g: float,
                        cfg: WeightConfig) -> tuple[float, float]:
    """Fade contouring weight and progress reward to zero approaching the goal."""
    sig = sigmoid(theta_g - theta_k, cfg.alpha, cfg.beta)
    return (1.0 - sig) * cfg.q_c, (1.0 - sig) * cfg.gamma


def terminal_weights(theta_0: float, theta_ref_end: float,
                     cfg: WeightConfig) -> np.ndarray:
    """Blend the terminal weight vector in as the robot base approaches."""
    sig = sigmoid(theta_ref_end - theta_0, cfg.alpha, cfg.beta)
    return sig * cfg.q_N_e_vec() + (1.0 - sig) * cfg.q_N_vec()


def objective_mode(theta_k: float, theta_e_global: float,
                   cfg: WeightConfig) -> tuple[float, ObjectiveMode]:
    """Hard case split on the lag weight at the global path end."""
    if theta_k < theta_e_global:
        return cfg.q_l, ObjectiveMode.CONTOURING
    return 0.0, ObjectiveMode.CARTESIAN


@dataclass
class WeightSchedule:
    """Effective per-stage weights for one horizon solve."""

    q_l_eff: np.ndarray            # (N,)
    q_c_eff: np.ndarray            # (N,)
    gamma_eff: np.ndarray          # (N,)
    frenet_active: np.ndarray      # (N,) bool; also gates corridor constraints
    modes: list[ObjectiveMode]     # (N,)
    q_N_eff: np.ndarray            # (6,)
    terminal_ref: np.ndarray       # (6,) reference for the terminal cost
    theta_upper: float | None      # hard progress cap, None when goal lies beyond

    @property
    def N(self) -> int:
        return len(self.modes)

    def validate(self, cfg: WeightConfig) -> None:
        q_c_max = max(cfg.q_c, cfg.q_c_e)
        for k, mode in enumerate(self.modes):
            cartesian = mode is ObjectiveMode.CARTESIAN
            if cartesian != (not self.frenet_active[k]):
                raise InvalidSchedule("mode and frenet_active disagree")
            if not cartesian and cfg.q_l > 0.0 and self.q_l_eff[k] == 0.0:
                raise InvalidSchedule("contouring stage with zero lag weight")
            if cartesian and (self.q_l_eff[k] != 0.0 or self.q_c_eff[k] != 0.0
                              or self.gamma_eff[k] != 0.0):
                raise InvalidSchedule("cartesian stage with active Frenet weights")
            if self.q_l_eff[k] not in (0.0, cfg.q_l):
                raise InvalidSchedule("lag weight must be 0 or q_l exactly")
            if not (0.0 <= self.q_c_eff[k] <= q_c_max + 1e-12):
                raise InvalidSchedule("contouring weight out of range")
            if not (cfg.gamma - 1e-12 <= self.gamma_eff[k] <= 0.0):
                raise InvalidSchedule("progress reward out of range")


def build_schedule(theta_traj, theta_0: float, path: ReferencePath,
                   goal: GoalPose | None, cfg: WeightConfig) -> WeightSchedule:
    """Dispatch the per-stage weight rules for one solve.

    ``theta_traj`` holds the predicted progress of stages 0..N-1 from the
    warm-start trajectory; the schedule is held fixed within the solve.
    """
    theta_traj = np.asarray(theta_traj, dtype=float)
    N = len(theta_traj)
    theta_e = path.theta_end

    q_l_eff = np.full(N, cfg.q_l)
    q_c_eff = np.empty(N)
    gamma_eff = np.full(N, cfg.gamma)
    frenet_active = np.ones(N, dtype=bool)
    modes = [ObjectiveMode.CONTOURING] * N

    from dockmpc.path import eval_reference  # local import to avoid cycle at module load

    if goal is None:
        for k, th in enumerate(theta_traj):
            q_c_eff[k] = path_end_contouring_weight(th, segment_end(path, th), cfg)
        q_N_eff = cfg.q_N_vec()
        terminal_ref = np.zeros(6)
        terminal_ref[:3] = eval_reference(path, theta_e)
        theta_upper = theta_e
    elif goal.location is GoalLocation.INSIDE_CORRIDOR:
        for k, th in enumerate(theta_traj):
            q_c_eff[k], gamma_eff[k] = goal_inside_weights(th, goal.theta_g, cfg)
        q_N_eff = terminal_weights(theta_0, goal.theta_g, cfg)
        terminal_ref = np.array([goal.x, goal.y, goal.phi, 0.0, 0.0, 0.0])
        theta_upper = theta_e
    else:  # goal beyond the path end
        for k, th in enumerate(theta_traj):
            q_l_eff[k], modes[k] = objective_mode(th, theta_e, cfg)
            if modes[k] is ObjectiveMode.CARTESIAN:
                q_c_eff[k] = 0.0
                gamma_eff[k] = 0.0
                frenet_active[k] = False
            else:
                q_c_eff[k], gamma_eff[k] = goal_inside_weights(th, theta_e, cfg)
        q_N_eff = terminal_weights(theta_0, theta_e, cfg)
        terminal_ref = np.array([goal.x, goal.y, goal.phi, 0.0, 0.0, 0.0])
        theta_upper = None

    schedule = WeightSchedule(q_l_eff, q_c_eff, gamma_eff, frenet_active,
                              modes, q_N_eff, terminal_ref, theta_upper)
    schedule.validate(cfg)
    return schedule
