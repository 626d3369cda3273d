"""Arc-length-parameterized reference path with corridor bounds.

A path is built from one or more legs. Each leg is a list of waypoints
driven either forward (+1) or in reverse (-1). Legs are smoothed with a
spline, resampled at fine arc-length spacing and concatenated; leg
boundaries become cusps where the driving direction flips.

For reverse legs the stored heading is the vehicle heading (travel
tangent + pi), so the heading stays continuous through a cusp and the
contouring/lag rotation needs no special casing.

Samples are stored per direction segment: the heading jumps by pi at a
cusp, which linear interpolation over a single global table could not
represent.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

SAMPLE_SPACING = 0.1       # resampling step [m], well under the 0.25 m guarantee
MIN_LEG_LENGTH = 0.5       # legs shorter than this are degenerate [m]
BEYOND_END_SLACK = 0.01    # tangent-line overshoot before a goal counts as beyond [m]


class DegeneratePath(ValueError):
    """Raised when a leg is too short or contains repeated waypoints."""


class GoalLocation(enum.Enum):
    INSIDE_CORRIDOR = "inside_corridor"
    BEYOND_PATH_END = "beyond_path_end"


@dataclass(frozen=True)
class DirectionSegment:
    theta_start: float
    theta_end: float
    direction: int  # +1 forward, -1 reverse


@dataclass(frozen=True)
class GoalPose:
    x: float
    y: float
    phi: float
    theta_g: float
    location: GoalLocation


@dataclass
class ReferencePath:
    """Per-segment sample tables (theta, x, y, phi) plus segment metadata."""

    seg_theta: list[np.ndarray]
    seg_x: list[np.ndarray]
    seg_y: list[np.ndarray]
    seg_phi: list[np.ndarray]
    segments: list[DirectionSegment]
    theta_end: float

    def segment_index(self, theta: float) -> int:
        """Segment owning theta; a cusp theta belongs to the following segment."""
        for i, seg in enumerate(self.segments[:-1]):
            if theta < seg.theta_end:
                return i
        return len(self.segments) - 1

    def start_pose(self) -> tuple[float, float, float]:
        return (self.seg_x[0][0], self.seg_y[0][0], self.seg_phi[0][0])

    def end_pose(self) -> tuple[float, float, float]:
        return (self.seg_x[-1][-1], self.seg_y[-1][-1], self.seg_phi[-1][-1])


@dataclass
class Corridor:
    """Piecewise-linear contouring-error bounds over theta."""

    theta_bp: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.theta_bp = np.asarray(self.theta_bp, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not (np.all(self.lower < 0.0) and np.all(self.upper > 0.0)):
            raise ValueError("corridor must contain the path: lower < 0 < upper")

    @staticmethod
    def constant(half_width: float, theta_end: float) -> "Corridor":
        return Corridor(np.array([0.0, theta_end]),
                        np.array([-half_width, -half_width]),
                        np.array([half_width, half_width]))


def corridor_bounds(corridor: Corridor, theta: float) -> tuple[float, float]:
    """Interpolated (lower, upper) bounds, clamped outside the breakpoints."""
    lo = float(np.interp(theta, corridor.theta_bp, corridor.lower))
    hi = float(np.interp(theta, corridor.theta_bp, corridor.upper))
    return lo, hi


def _resample_leg(waypoints: np.ndarray, direction: int):
    """Spline-smooth one leg and resample it by arc length."""
    if len(waypoints) < 2:
        raise DegeneratePath("a leg needs at least 2 waypoints")
    diffs = np.diff(waypoints, axis=0)
    seglen = np.hypot(diffs[:, 0], diffs[:, 1])
    if np.any(seglen < 1e-9):
        raise DegeneratePath("repeated waypoints in leg")
    chord = np.concatenate(([0.0], np.cumsum(seglen)))
    if chord[-1] < MIN_LEG_LENGTH:
        raise DegeneratePath(f"leg shorter than {MIN_LEG_LENGTH} m")

    k = min(3, len(waypoints) - 1)
    spline = make_interp_spline(chord, waypoints, k=k)
    deriv = spline.derivative()

    # dense evaluation for an accurate arc-length table
    n_dense = max(int(chord[-1] / 0.01), 50)
    t_dense = np.linspace(0.0, chord[-1], n_dense)
    pts = spline(t_dense)
    d = np.diff(pts, axis=0)
    arclen = np.concatenate(([0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))))
    total = arclen[-1]

    n_samples = max(int(np.ceil(total / SAMPLE_SPACING)), 2) + 1
    s_targets = np.linspace(0.0, total, n_samples)
    t_at_s = np.interp(s_targets, arclen, t_dense)
    xy = spline(t_at_s)
    tang = deriv(t_at_s)
    phi = np.arctan2(tang[:, 1], tang[:, 0])
    if direction < 0:
        phi = phi + np.pi
    phi = np.unwrap(phi)
    return s_targets, xy[:, 0], xy[:, 1], phi, total


def build_path(waypoints, directions) -> ReferencePath:
    """Build a reference path from per-leg waypoints and driving directions.

    ``waypoints`` is either a single leg (list of (x, y) pairs) or a list
    of legs; ``directions`` holds one +1/-1 entry per leg.
    """
    first = np.asarray(waypoints[0], dtype=float)
    if first.ndim == 1:  # flat list of points: one leg
        legs = [np.asarray(waypoints, dtype=float)]
    else:
        legs = [np.asarray(leg, dtype=float) for leg in waypoints]
    directions = [int(d) for d in np.atleast_1d(directions)]
    if len(directions) != len(legs):
        raise ValueError("need one direction per leg")
    if any(d not in (-1, 1) for d in directions):
        raise ValueError("directions must be +1 or -1")

    seg_theta, seg_x, seg_y, seg_phi, segments = [], [], [], [], []
    offset = 0.0
    prev_phi_end = None
    for leg, direction in zip(legs, directions):
        s, x, y, phi, total = _resample_leg(leg, direction)
        if prev_phi_end is not None:
            # keep the heading branch continuous across the cusp
            shift = 2.0 * np.pi * np.round((prev_phi_end - phi[0]) / (2.0 * np.pi))
            phi = phi + shift
        prev_phi_end = phi[-1]
        seg_theta.append(s + offset)
        seg_x.append(x)
        seg_y.append(y)
        seg_phi.append(phi)
        segments.append(DirectionSegment(offset, offset + total, direction))
        offset += total

    return ReferencePath(seg_theta, seg_x, seg_y, seg_phi, segments, offset)


def eval_reference(path: ReferencePath, theta: float) -> tuple[float, float, float]:
    """Reference pose (x, y, phi) at arc length theta.

    Outside [0, theta_end] the pose is extrapolated along the terminal
    (or initial) tangent with constant heading, keeping the mapping total
    and smooth for the optimizer.
    """
    if theta > path.theta_end:
        xe, ye, pe = path.end_pose()
        d = theta - path.theta_end
        return (xe + d * np.cos(pe), ye + d * np.sin(pe), pe)
    if theta < 0.0:
        x0, y0, p0 = path.start_pose()
        return (x0 + theta * np.cos(p0), y0 + theta * np.sin(p0), p0)
    i = path.segment_index(theta)
    th = path.seg_theta[i]
    return (
        float(np.interp(theta, th, path.seg_x[i])),
        float(np.interp(theta, th, path.seg_y[i])),
        float(np.interp(theta, th, path.seg_phi[i])),
    )


def eval_reference_batch(path: ReferencePath, thetas) -> np.ndarray:
    """Vectorized reference poses, shape (n, 3); same mapping as eval_reference."""
    thetas = np.asarray(thetas, dtype=float)
    out = np.empty((len(thetas), 3))
    bounds = np.array([seg.theta_end for seg in path.segments[:-1]])
    seg_idx = np.searchsorted(bounds, thetas, side="right")
    inside = (thetas >= 0.0) & (thetas <= path.theta_end)
    for i in range(len(path.segments)):
        m = inside & (seg_idx == i)
        if not np.any(m):
            continue
        th = path.seg_theta[i]
        out[m, 0] = np.interp(thetas[m], th, path.seg_x[i])
        out[m, 1] = np.interp(thetas[m], th, path.seg_y[i])
        out[m, 2] = np.interp(thetas[m], th, path.seg_phi[i])
    hi = thetas > path.theta_end
    if np.any(hi):
        xe, ye, pe = path.end_pose()
        d = thetas[hi] - path.theta_end
        out[hi, 0] = xe + d * np.cos(pe)
        out[hi, 1] = ye + d * np.sin(pe)
        out[hi, 2] = pe
    lo = thetas < 0.0
    if np.any(lo):
        x0, y0, p0 = path.start_pose()
        out[lo, 0] = x0 + thetas[lo] * np.cos(p0)
        out[lo, 1] = y0 + thetas[lo] * np.sin(p0)
        out[lo, 2] = p0
    return out


def segment_end(path: ReferencePath, theta: float) -> float:
    """theta_end of the segment containing theta (next cusp or path end)."""
    if theta >= path.theta_end:
        return path.theta_end
    return path.segments[path.segment_index(theta)].theta_end


def _refine_theta(path: ReferencePath, seg: int, idx: int, gx: float, gy: float) -> float:
    """Quadratic refinement of the grid-search minimizer within a segment."""
    th = path.seg_theta[seg]
    if idx == 0 or idx == len(th) - 1:
        return float(th[idx])
    ts = th[idx - 1:idx + 2]
    ds = [
        (path.seg_x[seg][j] - gx) ** 2 + (path.seg_y[seg][j] - gy) ** 2
        for j in (idx - 1, idx, idx + 1)
    ]
    denom = (ds[0] - 2.0 * ds[1] + ds[2])
    if abs(denom) < 1e-15:
        return float(ts[1])
    step = 0.5 * (ds[0] - ds[2]) / denom
    step = float(np.clip(step, -1.0, 1.0))
    h = ts[2] - ts[1]
    return float(ts[1] + step * h)


class AmbiguousProjectionWarning(UserWarning):
    """Two near-equidistant projection candidates far apart in theta."""


def project_position(path: ReferencePath, gx: float, gy: float) -> float:
    """Arc length of the path point nearest to (gx, gy).

    Coarse grid search over all samples with local quadratic refinement;
    near-equidistant candidates far apart in theta trigger a warning and
    resolve to the larger arc length.
    """
    best = None  # (dist2, seg, idx)
    candidates = []
    for seg in range(len(path.segments)):
        d2 = (path.seg_x[seg] - gx) ** 2 + (path.seg_y[seg] - gy) ** 2
        # local minima on this segment's grid (including endpoints)
        interior = np.ones(len(d2), dtype=bool)
        if len(d2) > 2:
            interior[1:-1] = (d2[1:-1] <= d2[:-2]) & (d2[1:-1] <= d2[2:])
        for idx in np.nonzero(interior)[0]:
            candidates.append((float(d2[idx]), seg, int(idx)))
        idx_min = int(np.argmin(d2))
        if best is None or d2[idx_min] < best[0]:
            best = (float(d2[idx_min]), seg, idx_min)

    assert best is not None
    d2_best, seg_best, idx_best = best
    theta_best = _refine_theta(path, seg_best, idx_best, gx, gy)

    # near-ties far apart in theta: warn, keep the larger theta
    for d2, seg, idx in candidates:
        th = float(path.seg_theta[seg][idx])
        if abs(d2 - d2_best) < 1e-6 and abs(th - theta_best) > 1.0:
            warnings.warn(
                "ambiguous goal projection; choosing the larger arc length",
                AmbiguousProjectionWarning,
            )
            if th > theta_best:
                theta_best = _refine_theta(path, seg, idx, gx, gy)

    return float(np.clip(theta_best, 0.0, path.theta_end))


def project_goal(path: ReferencePath, goal) -> GoalPose:
    """Project a goal pose (x, y, phi) onto the path.

    The goal counts as beyond the path end when its nearest path point is
    the path end itself and its projection onto the terminal tangent line
    overshoots theta_end by more than 1 cm.
    """
    gx, gy, gphi = float(goal[0]), float(goal[1]), float(goal[2])
    theta_best = project_position(path, gx, gy)

    if theta_best >= path.theta_end - SAMPLE_SPACING:
        xe, ye, pe = path.end_pose()
        travel = path.segments[-1].direction
        overshoot = travel * ((gx - xe) * np.cos(pe) + (gy - ye) * np.sin(pe))
        if overshoot > BEYOND_END_SLACK:
            return GoalPose(gx, gy, gphi, path.theta_end,
                            GoalLocation.BEYOND_PATH_END)
    return GoalPose(gx, gy, gphi, theta_best, GoalLocation.INSIDE_CORRIDOR)
