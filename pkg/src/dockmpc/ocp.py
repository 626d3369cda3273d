"""Finite-horizon optimal control problem and its Gauss-Newton SQP solver.

The horizon is condensed onto the input sequence: states are eliminated
by rolling out the RK4 dynamics, so dynamic feasibility holds by
construction for every iterate. Velocity, steering angle and progress
are affine in the inputs (their dynamics are linear and RK4 integrates
linear subsystems exactly), which makes their bounds exact linear
constraints of the condensed problem. Corridor bounds on the contouring
error are softened with L1+L2 penalized slacks so the subproblem stays
feasible from violating starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dockmpc import model as vm
from dockmpc.frenet import (frenet_errors, frenet_errors_batch,
                            frenet_jacobian, frenet_jacobian_batch)
from dockmpc.path import Corridor, ReferencePath, corridor_bounds
from dockmpc.qp import QPFailure, solve_qp
from dockmpc.weights import ObjectiveMode, WeightConfig, WeightSchedule

# soft corridor penalty: w1 * s + w2 * s^2 per meter of violation
SLACK_L1 = 1e4
SLACK_L2 = 1e4
CORRIDOR_MARGIN = 0.1   # approximate vehicle half-width [m]
HARD_ROW_PENALTY = 1e6  # merit weight for the exact linear state bounds
HARD_ROW_KEEP_STEPS = 3  # reachability horizon cap for state-bound row pruning

KKT_TOL = 1e-6
STALL_TOL = 1e-6    # relative merit decrease below which a step counts as a stall
STEP_TOL = 1e-6     # proposed input step below which the iterate is converged
MAX_SQP_ITER = 30
MAX_FAIL_STREAK = 5
LEVENBERG_MIN = 1e-6


class SolveFailed(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def wrap_angle(d: float) -> float:
    """Wrap an angle difference to (-pi, pi]."""
    r = (d + np.pi) % (2.0 * np.pi) - np.pi
    if r == -np.pi:
        r = np.pi
    return r


@dataclass
class HorizonProblem:
    N: int
    params: vm.ModelParams
    x0: np.ndarray
    schedule: WeightSchedule
    cfg: WeightConfig
    path: ReferencePath | None = None
    corridor: Corridor | None = None
    x_ref: np.ndarray = field(default_factory=lambda: np.zeros(6))
    u_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))
    margin: float = CORRIDOR_MARGIN

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.N < 2:
            raise ValueError("horizon must have at least 2 stages")
        if self.schedule.N != self.N:
            raise ValueError("schedule stage count must equal N")
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("initial state must be finite")


@dataclass
class TrajectorySolution:
    states: np.ndarray              # (N+1, 6)
    inputs: np.ndarray              # (N, 3)
    cost: float
    kkt_residual: float
    iterations: int
    stage_modes: list[ObjectiveMode]
    slack_max: float


def _state_residual(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    d = x - ref
    d[vm.IPHI] = wrap_angle(d[vm.IPHI])
    return d


def stage_cost(x_k, u_k, k: int, problem: HorizonProblem) -> float:
    """Quadratic tracking cost plus Frenet penalties and the progress reward."""
    sched = problem.schedule
    q = problem.cfg.q_vec()
    r = problem.cfg.r_vec()
    dx = _state_residual(np.asarray(x_k, dtype=float), problem.x_ref)
    du = np.asarray(u_k, dtype=float) - problem.u_ref
    cost = float(dx @ (q * dx) + du @ (r * du))
    if sched.frenet_active[k] and problem.path is not None:
        e = frenet_errors(x_k, problem.path)
        cost += sched.q_l_eff[k] * e.e_l ** 2 + sched.q_c_eff[k] * e.e_c ** 2
    cost += sched.gamma_eff[k] * float(u_k[vm.IDTHETA])
    return cost


def terminal_cost(x_N, problem: HorizonProblem) -> float:
    dx = _state_residual(np.asarray(x_N, dtype=float), problem.schedule.terminal_ref)
    return float(dx @ (problem.schedule.q_N_eff * dx))


def corridor_constraints(x_k, k: int, problem: HorizonProblem) -> list[float]:
    """Slack magnitudes [lower, upper] of the soft corridor bounds at stage k.

    Empty for Cartesian stages: no valid Frenet frame exists there.
    """
    sched = problem.schedule
    if not sched.frenet_active[min(k, sched.N - 1)]:
        return []
    if problem.corridor is None or problem.path is None:
        return []
    e_c = frenet_errors(x_k, problem.path).e_c
    lo, hi = corridor_bounds(problem.corridor, float(x_k[vm.ITHETA]))
    return [
        max(0.0, (lo + problem.margin) - e_c),
        max(0.0, e_c - (hi - problem.margin)),
    ]


def rollout(problem: HorizonProblem, U: np.ndarray) -> np.ndarray:
    return vm.rollout_horizon(problem.x0, U, problem.params)


def total_objective(problem: HorizonProblem, X: np.ndarray, U: np.ndarray) -> float:
    """Full nonlinear objective including the soft corridor penalty.

    Vectorized equivalent of summing stage_cost, terminal_cost and the
    penalized corridor_constraints slacks; this runs in the line search.
    """
    N = problem.N
    sched = problem.schedule
    q = problem.cfg.q_vec()
    r = problem.cfg.r_vec()

    dx = X[:N] - problem.x_ref
    dx[:, vm.IPHI] = np.mod(dx[:, vm.IPHI] + np.pi, 2.0 * np.pi) - np.pi
    du = U - problem.u_ref
    J = float(((dx * dx) @ q).sum() + ((du * du) @ r).sum())
    J += float(sched.gamma_eff @ U[:, vm.IDTHETA])

    if problem.path is not None and np.any(sched.frenet_active):
        m = sched.frenet_active
        e_l, e_c = frenet_errors_batch(X[:N][m], problem.path)
        J += float(sched.q_l_eff[m] @ (e_l * e_l) + sched.q_c_eff[m] @ (e_c * e_c))

    J += terminal_cost(X[N], problem)

    if problem.corridor is not None and problem.path is not None:
        gate = np.append(sched.frenet_active[1:], sched.frenet_active[N - 1])
        if np.any(gate):
            Xg = X[1:][gate]
            _, e_c = frenet_errors_batch(Xg, problem.path)
            lo = np.interp(Xg[:, vm.ITHETA], problem.corridor.theta_bp, problem.corridor.lower)
            hi = np.interp(Xg[:, vm.ITHETA], problem.corridor.theta_bp, problem.corridor.upper)
            s_lo = np.maximum(0.0, (lo + problem.margin) - e_c)
            s_hi = np.maximum(0.0, e_c - (hi - problem.margin))
            J += float(SLACK_L1 * (s_lo.sum() + s_hi.sum())
                       + SLACK_L2 * (s_lo @ s_lo + s_hi @ s_hi))
    return J


def _hard_bound_rows(problem: HorizonProblem, X, S):
    """Exact linear rows for v/delta bounds and the optional progress cap.

    Rows far from their bound are dropped. The threshold is the exact
    per-stage reachability (v, delta and theta are affine in the inputs,
    so stage k can move at most dt * k * (input range)), capped at a few
    steps' worth; a step that overshoots a pruned row is caught by the
    hard-violation merit penalty and the row re-enters next iteration.
    """
    p = problem.params
    dt = p.dt
    rows, rhs = [], []
    theta_cap = problem.schedule.theta_upper
    reach_v = dt * (p.a_bounds[1] - p.a_bounds[0])
    reach_d = dt * (p.delta_dot_bounds[1] - p.delta_dot_bounds[0])
    reach_t = dt * (p.theta_dot_bounds[1] - p.theta_dot_bounds[0])
    for k in range(1, problem.N + 1):
        kk = min(k, HARD_ROW_KEEP_STEPS)
        v, d = X[k][vm.IV], X[k][vm.IDELTA]
        if p.v_bounds[1] - v < reach_v * kk:
            rows.append(S[k][vm.IV]); rhs.append(p.v_bounds[1] - v)
        if v - p.v_bounds[0] < reach_v * kk:
            rows.append(-S[k][vm.IV]); rhs.append(v - p.v_bounds[0])
        if p.delta_bounds[1] - d < reach_d * kk:
            rows.append(S[k][vm.IDELTA]); rhs.append(p.delta_bounds[1] - d)
        if d - p.delta_bounds[0] < reach_d * kk:
            rows.append(-S[k][vm.IDELTA]); rhs.append(d - p.delta_bounds[0])
        if theta_cap is not None and theta_cap - X[k][vm.ITHETA] < reach_t * kk:
            rows.append(S[k][vm.ITHETA])
            rhs.append(theta_cap - X[k][vm.ITHETA])
    if not rows:
        return np.zeros((0, S.shape[2])), np.zeros(0)
    return np.array(rows), np.array(rhs)


def _hard_violation(problem: HorizonProblem, X) -> float:
    p = problem.params
    v = X[1:, vm.IV]
    d = X[1:, vm.IDELTA]
    viol = (np.maximum(0.0, v - p.v_bounds[1]).sum()
            + np.maximum(0.0, p.v_bounds[0] - v).sum()
            + np.maximum(0.0, d - p.delta_bounds[1]).sum()
            + np.maximum(0.0, p.delta_bounds[0] - d).sum())
    if problem.schedule.theta_upper is not None:
        viol += np.maximum(0.0, X[1:, vm.ITHETA] - problem.schedule.theta_upper).sum()
    return float(viol)


def _merit(problem: HorizonProblem, X, U) -> float:
    return total_objective(problem, X, U) + HARD_ROW_PENALTY * _hard_violation(problem, X)


def _sensitivities(problem: HorizonProblem, X, U):
    """S[k] = d x_k / d U, shape (N+1, 6, 3N)."""
    N = problem.N
    n_u = vm.INPUT_DIM * N
    S = np.zeros((N + 1, vm.STATE_DIM, n_u))
    A, B = vm.rollout_jacobians(X, U, problem.params)
    for k in range(N):
        S[k + 1] = A[k] @ S[k]
        S[k + 1][:, 3 * k:3 * k + 3] += B[k]
    return S


def _quadratic_model(problem: HorizonProblem, X, U, S):
    """Gauss-Newton Hessian and exact gradient of the smooth objective part."""
    N = problem.N
    n_u = vm.INPUT_DIM * N
    sched = problem.schedule
    q = problem.cfg.q_vec()
    r = problem.cfg.r_vec()

    H = np.zeros((n_u, n_u))
    g = np.zeros(n_u)

    # input cost and progress reward are separable per stage
    for k in range(N):
        sl = slice(3 * k, 3 * k + 3)
        H[sl, sl] += 2.0 * np.diag(r)
        g[sl] += 2.0 * r * (U[k] - problem.u_ref)
        g[3 * k + vm.IDTHETA] += sched.gamma_eff[k]

    rows, wts, res = [], [], []
    if np.any(q > 0.0):
        for k in range(1, N):
            dx = _state_residual(X[k], problem.x_ref)
            for i in np.nonzero(q > 0.0)[0]:
                rows.append(S[k][i]); wts.append(q[i]); res.append(dx[i])

    if problem.path is not None:
        ks = [k for k in range(1, N)
              if sched.frenet_active[k]
              and (sched.q_l_eff[k] > 0.0 or sched.q_c_eff[k] > 0.0)]
        if ks:
            e_l, e_c, Jf = frenet_jacobian_batch(X[ks], problem.path)
            for i, k in enumerate(ks):
                Ju = Jf[i] @ S[k][[vm.IX, vm.IY, vm.ITHETA]]
                wl, wc = sched.q_l_eff[k], sched.q_c_eff[k]
                if wl > 0.0:
                    rows.append(Ju[0]); wts.append(wl); res.append(e_l[i])
                if wc > 0.0:
                    rows.append(Ju[1]); wts.append(wc); res.append(e_c[i])

    dxN = _state_residual(X[N], sched.terminal_ref)
    for i in np.nonzero(sched.q_N_eff > 0.0)[0]:
        rows.append(S[N][i]); wts.append(sched.q_N_eff[i]); res.append(dxN[i])

    if rows:
        Jr = np.asarray(rows)
        w = np.asarray(wts)
        rres = np.asarray(res)
        H += 2.0 * (Jr.T * w) @ Jr
        g += 2.0 * Jr.T @ (w * rres)
    return H, g


CORRIDOR_PRUNE_GAP = 1.0  # drop corridor rows further than this from the bound [m]


def _corridor_rows(problem: HorizonProblem, X, S):
    """Linearized soft corridor rows: (jacobians, residual gaps, per side).

    Rows far from their bound are dropped from the subproblem; the soft
    hinge in the merit function still penalizes any violation a step
    introduces, so a pruned row re-enters on the next iteration.
    """
    if problem.corridor is None or problem.path is None:
        return [], []
    sched = problem.schedule
    cor = problem.corridor
    ks = [k for k in range(1, problem.N + 1)
          if sched.frenet_active[min(k, sched.N - 1)]]
    if not ks:
        return [], []
    Xk = X[ks]
    _, e_c = frenet_errors_batch(Xk, problem.path)
    lo = np.interp(Xk[:, vm.ITHETA], cor.theta_bp, cor.lower)
    hi = np.interp(Xk[:, vm.ITHETA], cor.theta_bp, cor.upper)
    gap_hi = (hi - problem.margin) - e_c
    gap_lo = e_c - (lo + problem.margin)
    keep = np.minimum(gap_hi, gap_lo) < CORRIDOR_PRUNE_GAP
    if not np.any(keep):
        return [], []
    kept = [k for k, m in zip(ks, keep) if m]
    _, _, Jf = frenet_jacobian_batch(X[kept], problem.path)
    entries_J, entries_gap = [], []
    for i, (k, gh, gl) in enumerate(
            zip(kept, gap_hi[keep], gap_lo[keep])):
        Jc = Jf[i, 1] @ S[k][[vm.IX, vm.IY, vm.ITHETA]]
        # e_c + Jc du <= hi - margin + s   and   -(e_c + Jc du) <= -(lo + margin) + s
        if gh < CORRIDOR_PRUNE_GAP:
            entries_J.append(Jc); entries_gap.append(gh)
        if gl < CORRIDOR_PRUNE_GAP:
            entries_J.append(-Jc); entries_gap.append(gl)
    return entries_J, entries_gap


def _build_qp(problem: HorizonProblem, X, U, S, H, g, lev: float):
    """Assemble the condensed QP over (du, slacks).

    Input box bounds and slack nonnegativity are variable bounds; only
    the state bound rows and corridor rows are general constraints.
    """
    N = problem.N
    n_u = vm.INPUT_DIM * N

    corr_J, corr_gap = _corridor_rows(problem, X, S)
    n_s = len(corr_J)
    n_z = n_u + n_s

    P = np.zeros((n_z, n_z))
    P[:n_u, :n_u] = H + lev * np.eye(n_u)
    if n_s:
        P[n_u:, n_u:] += 2.0 * SLACK_L2 * np.eye(n_s)
    qv = np.concatenate([g, np.full(n_s, SLACK_L1)])

    lo, hi = problem.params.input_bounds()
    lb = np.concatenate([(lo[None, :] - U).ravel(), np.zeros(n_s)])
    ub = np.concatenate([(hi[None, :] - U).ravel(), np.full(n_s, np.inf)])

    hrows, hrhs = _hard_bound_rows(problem, X, S)
    n_h = len(hrhs)
    G = np.zeros((n_h + n_s, n_z))
    h = np.empty(n_h + n_s)
    if n_h:
        G[:n_h, :n_u] = hrows
        h[:n_h] = hrhs
    for i, (Jc, gap) in enumerate(zip(corr_J, corr_gap)):
        G[n_h + i, :n_u] = Jc
        G[n_h + i, n_u + i] = -1.0
        h[n_h + i] = gap
    return P, qv, G, h, lb, ub, n_u


def solve(problem: HorizonProblem,
          warm_start: TrajectorySolution | None = None,
          max_iter: int | None = None) -> TrajectorySolution:
    """Gauss-Newton SQP with an interior-point QP and merit line search."""
    N = problem.N
    lo, hi = problem.params.input_bounds()
    if warm_start is not None:
        if len(warm_start.inputs) != N:
            raise ValueError("warm start horizon mismatch")
        U = np.clip(warm_start.inputs.copy(), lo, hi)
    else:
        U = np.zeros((N, vm.INPUT_DIM))

    X = rollout(problem, U)
    merit = _merit(problem, X, U)
    best = (merit, X.copy(), U.copy(), np.inf)
    lev = LEVENBERG_MIN
    fail_streak = 0
    qp_solved = 0
    stall = 0
    kkt = np.inf
    it = 0

    for it in range(1, (max_iter or MAX_SQP_ITER) + 1):
        S = _sensitivities(problem, X, U)
        H, g = _quadratic_model(problem, X, U, S)
        try:
            P, qv, G, h, lb, ub, n_u = _build_qp(problem, X, U, S, H, g, lev)
            res = solve_qp(P, qv, G, h, lb, ub)
            qp_solved += 1
        except QPFailure:
            lev = max(lev * 10.0, 1e-4)
            fail_streak += 1
            if fail_streak >= MAX_FAIL_STREAK:
                if qp_solved == 0:
                    raise SolveFailed("QP subproblem repeatedly failed",
                                      {"iterations": it, "merit": merit})
                break  # keep the best accepted iterate
            continue

        dU = res.z[:n_u].reshape(N, vm.INPUT_DIM)
        lam_u = (G[:, :n_u].T @ res.lam if len(res.lam) else 0.0)
        lam_u = lam_u - res.lam_lb[:n_u] + res.lam_ub[:n_u]
        kkt = float(np.abs(g + lam_u).max())
        step = float(np.abs(dU).max())
        pred_dec = -float(qv @ res.z + 0.5 * res.z @ (P @ res.z))
        # the QP objective excludes the hard-violation merit penalty, so a
        # pure constraint-repair step predicts no decrease; never treat
        # that as convergence while the iterate still violates a bound
        feasible = _hard_violation(problem, X) == 0.0
        # the kkt residual uses the QP multipliers, which certify the
        # post-step point; it only indicates convergence of the current
        # iterate when the proposed step is itself small
        if (step < STEP_TOL
                or (feasible
                    and ((step < 1e-3
                          and kkt < KKT_TOL * (1.0 + float(np.abs(g).max())))
                         or pred_dec < STALL_TOL * (1.0 + abs(merit))))):
            break

        accepted = False
        t = 1.0
        merit_prev = merit
        for _ in range(20):
            U_new = np.clip(U + t * dU, lo, hi)
            X_new = rollout(problem, U_new)
            m_new = _merit(problem, X_new, U_new)
            if m_new < merit - 1e-12 * (1.0 + abs(merit)):
                U, X, merit = U_new, X_new, m_new
                accepted = True
                break
            t *= 0.5
        if accepted:
            fail_streak = 0
            # trust-region-style damping: a damped line search means the
            # quadratic model overshoots, so shorten the next step
            if t == 1.0:
                lev = max(LEVENBERG_MIN, lev * 0.5)
            elif t <= 0.25:
                lev = min(lev * 4.0, 1e6)
            if merit < best[0]:
                best = (merit, X.copy(), U.copy(), kkt)
            # progress stall: accepted steps no longer move the merit
            if merit_prev - merit < STALL_TOL * (1.0 + abs(merit)):
                stall += 1
                if stall >= 2:
                    break
            else:
                stall = 0
        else:
            # the quadratic model overshoots even at tiny steps; escalate
            # the damping until the predicted decrease test terminates
            fail_streak += 1
            lev = min(lev * 10.0, 1e8)
            if fail_streak >= 2 * MAX_FAIL_STREAK:
                break  # merit is at a local floor; keep the best iterate

    if merit <= best[0]:
        best = (merit, X, U, kkt)
    _, X, U, kkt_best = best
    slack_max = 0.0
    for k in range(1, N + 1):
        for s in corridor_constraints(X[k], k, problem):
            slack_max = max(slack_max, s)
    return TrajectorySolution(
        states=X,
        inputs=U,
        cost=total_objective(problem, X, U),
        kkt_residual=min(kkt, kkt_best),
        iterations=it,
        stage_modes=list(problem.schedule.modes),
        slack_max=slack_max,
    )
