"""Kinematic bicycle model augmented with path progress.

State layout: (x, y, phi, v, delta, theta)
Input layout: (a, delta_dot, theta_dot)

The heading phi is kept unwrapped so angle differences stay continuous
across a horizon. theta is the arc-length progress along the reference
path, driven by the virtual input theta_dot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STATE_DIM = 6
INPUT_DIM = 3

# index constants for readability
IX, IY, IPHI, IV, IDELTA, ITHETA = range(STATE_DIM)
IA, IDDELTA, IDTHETA = range(INPUT_DIM)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    phi: float
    v: float
    delta: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.x, self.y, self.phi, self.v, self.delta, self.theta], dtype=float
        )

    @staticmethod
    def from_array(a) -> "VehicleState":
        a = np.asarray(a, dtype=float)
        return VehicleState(*a[:STATE_DIM])


@dataclass(frozen=True)
class ControlInput:
    a: float
    delta_dot: float
    theta_dot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.delta_dot, self.theta_dot], dtype=float)

    @staticmethod
    def from_array(a) -> "ControlInput":
        a = np.asarray(a, dtype=float)
        return ControlInput(*a[:INPUT_DIM])


@dataclass(frozen=True)
class ModelParams:
    wheelbase: float = 2.5
    dt: float = 0.1
    v_bounds: tuple[float, float] = (-2.0, 2.0)
    delta_bounds: tuple[float, float] = (-0.6, 0.6)
    a_bounds: tuple[float, float] = (-1.0, 1.0)
    delta_dot_bounds: tuple[float, float] = (-0.5, 0.5)
    theta_dot_bounds: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self):
        if self.wheelbase <= 0.0:
            raise ValueError("wheelbase must be positive")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        for name in ("v_bounds", "delta_bounds", "a_bounds",
                     "delta_dot_bounds", "theta_dot_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name}: lower bound must be < upper bound")

    def input_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Box bounds for (a, delta_dot, theta_dot) as (lower, upper)."""
        lo = np.array([self.a_bounds[0], self.delta_dot_bounds[0],
                       self.theta_dot_bounds[0]])
        hi = np.array([self.a_bounds[1], self.delta_dot_bounds[1],
                       self.theta_dot_bounds[1]])
        return lo, hi


def continuous_dynamics(s: np.ndarray, u: np.ndarray, p: ModelParams) -> np.ndarray:
    """Time derivative of the augmented bicycle state."""
    x, y, phi, v, delta, theta = s
    a, delta_dot, theta_dot = u
    return np.array([
        v * np.cos(phi),
        v * np.sin(phi),
        v * np.tan(delta) / p.wheelbase,
        a,
        delta_dot,
        theta_dot,
    ])


def continuous_jacobians(s: np.ndarray, u: np.ndarray,
                         p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of continuous_dynamics w.r.t. state and input."""
    _, _, phi, v, delta, _ = s
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[IX, IPHI] = -v * np.sin(phi)
    A[IX, IV] = np.cos(phi)
    A[IY, IPHI] = v * np.cos(phi)
    A[IY, IV] = np.sin(phi)
    A[IPHI, IV] = np.tan(delta) / p.wheelbase
    A[IPHI, IDELTA] = v / (p.wheelbase * np.cos(delta) ** 2)
    B = np.zeros((STATE_DIM, INPUT_DIM))
    B[IV, IA] = 1.0
    B[IDELTA, IDDELTA] = 1.0
    B[ITHETA, IDTHETA] = 1.0
    return A, B


def discretize_rk4(s: np.ndarray, u: np.ndarray, p: ModelParams,
                   dt: float | None = None) -> np.ndarray:
    """One classical RK4 step with zero-order-hold input."""
    h = p.dt if dt is None else dt
    k1 = continuous_dynamics(s, u, p)
    k2 = continuous_dynamics(s + 0.5 * h * k1, u, p)
    k3 = continuous_dynamics(s + 0.5 * h * k2, u, p)
    k4 = continuous_dynamics(s + h * k3, u, p)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _stage_values(X, U, p: ModelParams):
    """Per-stage RK4 evaluation points for the decoupled subsystems.

    v and delta are affine in the inputs and phi_dot does not depend on
    phi, so every RK4 stage value along a rollout is available in closed
    form; the second and third stages coincide for v, delta and phi_dot.
    """
    h = p.dt
    L = p.wheelbase
    phi, v, delta = X[:-1, IPHI], X[:-1, IV], X[:-1, IDELTA]
    a, dd = U[:, IA], U[:, IDDELTA]
    v2 = v + 0.5 * h * a
    v4 = v + h * a
    d2 = delta + 0.5 * h * dd
    d4 = delta + h * dd
    k1p = v * np.tan(delta) / L
    k2p = v2 * np.tan(d2) / L
    k4p = v4 * np.tan(d4) / L
    p2 = phi + 0.5 * h * k1p
    p3 = phi + 0.5 * h * k2p
    p4 = phi + h * k2p
    return (v, v2, v4), (delta, d2, d4), (phi, p2, p3, p4), (k1p, k2p, k4p)


def rollout_horizon(x0: np.ndarray, U: np.ndarray, p: ModelParams) -> np.ndarray:
    """Vectorized RK4 rollout of an input sequence, shape (N+1, 6).

    Matches repeated discretize_rk4 to floating-point accuracy: the
    linear subsystems (v, delta, theta) integrate exactly and the phi
    and position increments depend only on closed-form stage values, so
    the whole horizon reduces to cumulative sums.
    """
    U = np.asarray(U, dtype=float)
    N = len(U)
    h = p.dt
    X = np.empty((N + 1, STATE_DIM))
    X[0] = x0
    X[1:, IV] = x0[IV] + h * np.cumsum(U[:, IA])
    X[1:, IDELTA] = x0[IDELTA] + h * np.cumsum(U[:, IDDELTA])
    X[1:, ITHETA] = x0[ITHETA] + h * np.cumsum(U[:, IDTHETA])

    (v, v2, v4), _, _, (k1p, k2p, k4p) = _stage_values_open(x0, U, p)
    dphi = (h / 6.0) * (k1p + 4.0 * k2p + k4p)
    X[1:, IPHI] = x0[IPHI] + np.cumsum(dphi)
    phi = np.empty(N)
    phi[0] = x0[IPHI]
    phi[1:] = X[1:-1, IPHI]
    p2 = phi + 0.5 * h * k1p
    p3 = phi + 0.5 * h * k2p
    p4 = phi + h * k2p
    dx = (h / 6.0) * (v * np.cos(phi) + 2.0 * v2 * (np.cos(p2) + np.cos(p3))
                      + v4 * np.cos(p4))
    dy = (h / 6.0) * (v * np.sin(phi) + 2.0 * v2 * (np.sin(p2) + np.sin(p3))
                      + v4 * np.sin(p4))
    X[1:, IX] = x0[IX] + np.cumsum(dx)
    X[1:, IY] = x0[IY] + np.cumsum(dy)
    return X


def _stage_values_open(x0, U, p: ModelParams):
    """Stage values for v, delta and phi_dot before phi is known."""
    h = p.dt
    L = p.wheelbase
    a, dd = U[:, IA], U[:, IDDELTA]
    v = np.empty(len(U))
    v[0] = x0[IV]
    v[1:] = x0[IV] + h * np.cumsum(a[:-1])
    delta = np.empty(len(U))
    delta[0] = x0[IDELTA]
    delta[1:] = x0[IDELTA] + h * np.cumsum(dd[:-1])
    v2 = v + 0.5 * h * a
    v4 = v + h * a
    d2 = delta + 0.5 * h * dd
    d4 = delta + h * dd
    k1p = v * np.tan(delta) / L
    k2p = v2 * np.tan(d2) / L
    k4p = v4 * np.tan(d4) / L
    return (v, v2, v4), (delta, d2, d4), None, (k1p, k2p, k4p)


def rollout_jacobians(X: np.ndarray, U: np.ndarray,
                      p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Batched RK4 Jacobians along a rollout: A (N, 6, 6), B (N, 6, 3).

    Equivalent to dynamics_jacobians applied at every (X[k], U[k]).
    """
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    N = len(U)
    h = p.dt
    L = p.wheelbase
    (v, v2, v4), (d1, d2, d4), (p1, p2, p3, p4), _ = _stage_values(X, U, p)

    def cont_A(vv, ddl, pph):
        A = np.zeros((N, STATE_DIM, STATE_DIM))
        A[:, IX, IPHI] = -vv * np.sin(pph)
        A[:, IX, IV] = np.cos(pph)
        A[:, IY, IPHI] = vv * np.cos(pph)
        A[:, IY, IV] = np.sin(pph)
        A[:, IPHI, IV] = np.tan(ddl) / L
        A[:, IPHI, IDELTA] = vv / (L * np.cos(ddl) ** 2)
        return A

    A1 = cont_A(v, d1, p1)
    A2 = cont_A(v2, d2, p2)
    A3 = cont_A(v2, d2, p3)
    A4 = cont_A(v4, d4, p4)
    Bc = np.zeros((STATE_DIM, INPUT_DIM))
    Bc[IV, IA] = Bc[IDELTA, IDDELTA] = Bc[ITHETA, IDTHETA] = 1.0
    eye = np.eye(STATE_DIM)

    dk1x, dk1u = A1, np.broadcast_to(Bc, (N, STATE_DIM, INPUT_DIM))
    dk2x = A2 @ (eye + 0.5 * h * dk1x)
    dk2u = A2 @ (0.5 * h * dk1u) + Bc
    dk3x = A3 @ (eye + 0.5 * h * dk2x)
    dk3u = A3 @ (0.5 * h * dk2u) + Bc
    dk4x = A4 @ (eye + h * dk3x)
    dk4u = A4 @ (h * dk3u) + Bc
    A = eye + (h / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x)
    B = (h / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u)
    return A, B


def dynamics_jacobians(s: np.ndarray, u: np.ndarray, p: ModelParams,
                       dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians of the RK4 step w.r.t. state and input.

    Chains the continuous Jacobians through the four RK4 stages.
    """
    h = p.dt if dt is None else dt
    eye = np.eye(STATE_DIM)

    k1 = continuous_dynamics(s, u, p)
    A1, B1 = continuous_jacobians(s, u, p)
    dk1_dx, dk1_du = A1, B1

    s2 = s + 0.5 * h * k1
    k2 = continuous_dynamics(s2, u, p)
    A2, B2 = continuous_jacobians(s2, u, p)
    dk2_dx = A2 @ (eye + 0.5 * h * dk1_dx)
    dk2_du = A2 @ (0.5 * h * dk1_du) + B2

    s3 = s + 0.5 * h * k2
    A3, B3 = continuous_jacobians(s3, u, p)
    dk3_dx = A3 @ (eye + 0.5 * h * dk2_dx)
    dk3_du = A3 @ (0.5 * h * dk2_du) + B3

    k3 = continuous_dynamics(s3, u, p)
    s4 = s + h * k3
    A4, B4 = continuous_jacobians(s4, u, p)
    dk4_dx = A4 @ (eye + h * dk3_dx)
    dk4_du = A4 @ (h * dk3_du) + B4

    A = eye + (h / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx)
    B = (h / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)
    return A, B
