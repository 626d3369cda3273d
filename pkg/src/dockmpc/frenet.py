"""Contouring/lag error via rotation around the reference pose.

The rotation preserves the planar distance, so e_l^2 + e_c^2 equals the
squared distance between the vehicle and the reference pose at the same
theta. The approximation that e_c is the true lateral distance holds
when the lag weight dominates the contouring weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dockmpc.path import ReferencePath, eval_reference, eval_reference_batch

REF_DIFF_STEP = 1e-4  # finite-difference step for d(ref pose)/d(theta) [m]


@dataclass(frozen=True)
class FrenetErrors:
    e_l: float  # longitudinal (lag) error [m]
    e_c: float  # lateral (contouring) error [m]; positive = left of the path


def frenet_errors(state, path: ReferencePath) -> FrenetErrors:
    """Rotate the position difference into the reference-pose frame."""
    x, y, theta = float(state[0]), float(state[1]), float(state[5])
    xr, yr, phir = eval_reference(path, theta)
    c, s = np.cos(phir), np.sin(phir)
    dx, dy = x - xr, y - yr
    return FrenetErrors(e_l=dx * c + dy * s, e_c=-dx * s + dy * c)


def frenet_errors_batch(X: np.ndarray, path: ReferencePath) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (e_l, e_c) for a stack of states, shape (n,) each."""
    X = np.asarray(X, dtype=float)
    ref = eval_reference_batch(path, X[:, 5])
    c, s = np.cos(ref[:, 2]), np.sin(ref[:, 2])
    dx = X[:, 0] - ref[:, 0]
    dy = X[:, 1] - ref[:, 1]
    return dx * c + dy * s, -dx * s + dy * c


def _reference_derivative(path: ReferencePath, theta: float):
    h = REF_DIFF_STEP
    xp, yp, pp = eval_reference(path, theta + h)
    xm, ym, pm = eval_reference(path, theta - h)
    return ((xp - xm) / (2 * h), (yp - ym) / (2 * h), (pp - pm) / (2 * h))


def frenet_jacobian_batch(X: np.ndarray, path: ReferencePath
                          ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized frenet_jacobian: returns (e_l, e_c, J) with J (n, 2, 3)."""
    X = np.asarray(X, dtype=float)
    thetas = X[:, 5]
    ref = eval_reference_batch(path, thetas)
    c, s = np.cos(ref[:, 2]), np.sin(ref[:, 2])
    dx = X[:, 0] - ref[:, 0]
    dy = X[:, 1] - ref[:, 1]
    e_l = dx * c + dy * s
    e_c = -dx * s + dy * c
    h = REF_DIFF_STEP
    rp = eval_reference_batch(path, thetas + h)
    rm = eval_reference_batch(path, thetas - h)
    dxr = (rp[:, 0] - rm[:, 0]) / (2 * h)
    dyr = (rp[:, 1] - rm[:, 1]) / (2 * h)
    dphir = (rp[:, 2] - rm[:, 2]) / (2 * h)
    J = np.empty((len(X), 2, 3))
    J[:, 0, 0] = c
    J[:, 0, 1] = s
    J[:, 0, 2] = -(dxr * c + dyr * s) + e_c * dphir
    J[:, 1, 0] = -s
    J[:, 1, 1] = c
    J[:, 1, 2] = (dxr * s - dyr * c) - e_l * dphir
    return e_l, e_c, J


def frenet_jacobian(state, path: ReferencePath) -> np.ndarray:
    """Partials of (e_l, e_c) w.r.t. (x, y, theta), shape (2, 3).

    The reference pose is treated as a function of theta; its derivative
    is taken by central differences over the sample table.
    """
    x, y, theta = float(state[0]), float(state[1]), float(state[5])
    xr, yr, phir = eval_reference(path, theta)
    c, s = np.cos(phir), np.sin(phir)
    dx, dy = x - xr, y - yr
    e_l = dx * c + dy * s
    e_c = -dx * s + dy * c
    dxr, dyr, dphir = _reference_derivative(path, theta)

    J = np.empty((2, 3))
    J[0, 0] = c
    J[0, 1] = s
    J[0, 2] = -(dxr * c + dyr * s) + e_c * dphir
    J[1, 0] = -s
    J[1, 1] = c
    J[1, 2] = (dxr * s - dyr * c) - e_l * dphir
    return J
