"""Horizon problem assembly and the Gauss-Newton SQP solver."""

import numpy as np
import pytest

from dockmpc import model as vm
from dockmpc import ocp
from dockmpc import path as pm
from dockmpc.weights import ObjectiveMode, WeightConfig, WeightSchedule


def straight(length=40.0):
    return pm.build_path([(0.0, 0.0), (length, 0.0)], [1])


def quarter_circle(radius=5.0, n=60):
    ang = np.linspace(0.0, np.pi / 2, n)
    pts = [(radius * np.sin(a), radius * (1 - np.cos(a))) for a in ang]
    return pm.build_path(pts, [1])


def make_schedule(N, cfg, *, q_l=None, q_c=None, gamma=None, frenet=True,
                  q_N_eff=None, terminal_ref=None, theta_upper=None):
    """Hand-built schedule for solver tests (bypasses goal dispatch)."""
    q_l = cfg.q_l if q_l is None else q_l
    q_c = cfg.q_c if q_c is None else q_c
    gamma = cfg.gamma if gamma is None else gamma
    mode = ObjectiveMode.CONTOURING if frenet else ObjectiveMode.CARTESIAN
    return WeightSchedule(
        q_l_eff=np.full(N, q_l),
        q_c_eff=np.full(N, q_c),
        gamma_eff=np.full(N, gamma),
        frenet_active=np.full(N, frenet, dtype=bool),
        modes=[mode] * N,
        q_N_eff=np.zeros(6) if q_N_eff is None else np.asarray(q_N_eff, float),
        terminal_ref=np.zeros(6) if terminal_ref is None
        else np.asarray(terminal_ref, float),
        theta_upper=theta_upper,
    )


CFG = WeightConfig()


class TestStageCost:
    def test_on_reference_zero(self):
        path = straight()
        prob = ocp.HorizonProblem(N=5, params=vm.ModelParams(),
                                  x0=np.zeros(6),
                                  schedule=make_schedule(5, CFG), cfg=CFG,
                                  path=path)
        x = np.array([3.0, 0.0, 0.0, 0.0, 0.0, 3.0])  # on the path
        assert ocp.stage_cost(x, np.zeros(3), 0, prob) == pytest.approx(
            0.0, abs=1e-12)

    def test_single_contouring_term(self):
        path = straight()
        sched = make_schedule(5, CFG, q_l=0.0, q_c=1.0, gamma=0.0)
        prob = ocp.HorizonProblem(N=5, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path)
        x = np.array([3.0, 0.5, 0.0, 0.0, 0.0, 3.0])  # e_c = 0.5
        assert ocp.stage_cost(x, np.zeros(3), 0, prob) == pytest.approx(
            0.25, abs=1e-12)

    def test_progress_reward(self):
        path = straight()
        sched = make_schedule(5, CFG, q_l=0.0, q_c=0.0, gamma=-100.0)
        cfg = WeightConfig(r=(0.0, 0.0, 0.0))
        prob = ocp.HorizonProblem(N=5, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=cfg,
                                  path=path)
        x = np.array([3.0, 0.0, 0.0, 0.0, 0.0, 3.0])
        u = np.array([0.0, 0.0, 1.0])  # theta_dot = 1
        assert ocp.stage_cost(x, u, 0, prob) == pytest.approx(-100.0,
                                                              abs=1e-9)


class TestTerminalCost:
    def _prob(self, q_N_eff, ref):
        sched = make_schedule(5, CFG, q_N_eff=q_N_eff, terminal_ref=ref)
        return ocp.HorizonProblem(N=5, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=straight())

    def test_at_goal_zero(self):
        ref = np.array([3.0, 1.0, 0.2, 0.0, 0.0, 0.0])
        prob = self._prob([1e4, 1e4, 1e4, 0, 0, 0], ref)
        assert ocp.terminal_cost(ref, prob) == pytest.approx(0.0, abs=1e-12)

    def test_position_error(self):
        ref = np.zeros(6)
        prob = self._prob([1e4, 1e4, 1e4, 0, 0, 0], ref)
        x = np.array([0.1, 0.0, 0.0, 0.0, 0.0, 0.0])
        assert ocp.terminal_cost(x, prob) == pytest.approx(100.0, abs=1e-9)

    def test_zero_weights(self):
        prob = self._prob(np.zeros(6), np.zeros(6))
        x = np.array([50.0, -3.0, 2.0, 1.0, 0.3, 9.0])
        assert ocp.terminal_cost(x, prob) == 0.0

    def test_heading_residual_wraps(self):
        ref = np.zeros(6)
        prob = self._prob([0, 0, 1.0, 0, 0, 0], ref)
        x = np.array([0.0, 0.0, 2.0 * np.pi - 0.1, 0.0, 0.0, 0.0])
        assert ocp.terminal_cost(x, prob) == pytest.approx(0.01, abs=1e-9)


class TestCorridorConstraints:
    def _prob(self, frenet=True):
        path = straight()
        cor = pm.Corridor.constant(1.5, path.theta_end)
        sched = make_schedule(5, CFG, frenet=frenet)
        return ocp.HorizonProblem(N=5, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path, corridor=cor)

    def test_strictly_feasible(self):
        prob = self._prob()
        x = np.array([3.0, 0.0, 0.0, 0.0, 0.0, 3.0])
        assert ocp.corridor_constraints(x, 1, prob) == [0.0, 0.0]

    def test_upper_violation_slack(self):
        prob = self._prob()
        x = np.array([3.0, 1.6, 0.0, 0.0, 0.0, 3.0])
        lo_s, hi_s = ocp.corridor_constraints(x, 1, prob)
        assert lo_s == 0.0
        assert hi_s == pytest.approx(0.2, abs=1e-9)  # 1.6 - (1.5 - 0.1)

    def test_cartesian_stage_empty(self):
        prob = self._prob(frenet=False)
        x = np.array([3.0, 100.0, 0.0, 0.0, 0.0, 3.0])
        assert ocp.corridor_constraints(x, 1, prob) == []


class TestQPGradient:
    def test_matches_finite_differences_20_problems(self):
        rng = np.random.default_rng(21)
        worst = 0.0
        for trial in range(20):
            N = int(rng.integers(6, 12))
            curved = trial % 2 == 0
            path = quarter_circle() if curved else straight(20.0)
            cfg = WeightConfig(
                q=tuple(rng.uniform(0, 2, size=6)),
                r=tuple(rng.uniform(0.1, 2, size=3)),
                q_l=float(rng.uniform(0, 50)),
                q_c=float(rng.uniform(0, 5)),
                gamma=float(-rng.uniform(0, 20)),
            )
            ref = np.zeros(6)
            ref[:3] = pm.eval_reference(path, 0.6 * path.theta_end)
            sched = make_schedule(
                N, cfg, q_N_eff=rng.uniform(0, 10, size=6),
                terminal_ref=ref)
            x0 = np.zeros(6)
            x0[:3] = pm.eval_reference(path, 1.0)
            x0[vm.ITHETA] = 1.0
            x0[vm.IV] = rng.uniform(0, 1)
            prob = ocp.HorizonProblem(N=N, params=vm.ModelParams(), x0=x0,
                                      schedule=sched, cfg=cfg, path=path)
            U = rng.uniform(-0.3, 0.3, size=(N, 3))
            X = ocp.rollout(prob, U)
            S = ocp._sensitivities(prob, X, U)
            _, g = ocp._quadratic_model(prob, X, U, S)

            h = 1e-6
            g_fd = np.empty_like(g)
            u_flat = U.ravel()
            for j in range(len(u_flat)):
                up, um = u_flat.copy(), u_flat.copy()
                up[j] += h
                um[j] -= h
                Jp = ocp.total_objective(prob, ocp.rollout(
                    prob, up.reshape(N, 3)), up.reshape(N, 3))
                Jm = ocp.total_objective(prob, ocp.rollout(
                    prob, um.reshape(N, 3)), um.reshape(N, 3))
                g_fd[j] = (Jp - Jm) / (2 * h)
            rel = np.abs(g - g_fd).max() / (1.0 + np.abs(g_fd).max())
            worst = max(worst, rel)
        assert worst < 1e-4


class TestSolve:
    def test_at_goal_stationary(self):
        ref = np.array([5.0, 0.0, 0.0, 0.0, 0.0, 5.0])
        sched = make_schedule(10, CFG, q_l=0.0, q_c=0.0, gamma=0.0,
                              q_N_eff=[1e4, 1e4, 1e4, 0, 0, 0],
                              terminal_ref=ref)
        prob = ocp.HorizonProblem(N=10, params=vm.ModelParams(), x0=ref,
                                  schedule=sched, cfg=CFG, path=straight())
        sol = ocp.solve(prob)
        assert np.abs(sol.inputs).max() < 1e-4
        assert sol.cost == pytest.approx(0.0, abs=1e-6)

    def test_progress_reward_drives_theta_dot_to_bound(self):
        N = 8
        cfg = WeightConfig(r=(1.0, 1.0, 0.0))
        sched = make_schedule(N, cfg, q_l=0.0, q_c=0.0, gamma=-100.0,
                              frenet=False)
        prob = ocp.HorizonProblem(N=N, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=cfg)
        sol = ocp.solve(prob)
        hi = vm.ModelParams().theta_dot_bounds[1]
        assert np.abs(sol.inputs[:, vm.IDTHETA] - hi).max() < 1e-6

    def test_dynamic_feasibility(self):
        path = straight()
        ref = np.array([10.0, 0.5, 0.0, 0.0, 0.0, 0.0])
        sched = make_schedule(20, CFG, q_N_eff=[1e4, 1e4, 1e4, 0, 0, 0],
                              terminal_ref=ref, theta_upper=path.theta_end)
        prob = ocp.HorizonProblem(N=20, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path,
                                  corridor=pm.Corridor.constant(
                                      1.5, path.theta_end))
        sol = ocp.solve(prob)
        X = vm.rollout_horizon(prob.x0, sol.inputs, prob.params)
        assert np.abs(X - sol.states).max() < 1e-6

    def test_inputs_within_bounds(self):
        path = straight()
        sched = make_schedule(15, CFG, theta_upper=path.theta_end)
        prob = ocp.HorizonProblem(N=15, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path)
        sol = ocp.solve(prob)
        lo, hi = prob.params.input_bounds()
        assert np.all(sol.inputs >= lo - 1e-9)
        assert np.all(sol.inputs <= hi + 1e-9)

    def test_double_integrator_matches_dense_oracle(self):
        # freeze steering: along a straight heading the (x, v) pair with
        # input a is a double integrator that RK4 integrates exactly, so
        # the condensed problem is an unconstrained QP a dense linear
        # solve can reproduce
        N = 12
        dt = 0.1
        params = vm.ModelParams(dt=dt, v_bounds=(-100.0, 100.0),
                                a_bounds=(-100.0, 100.0))
        cfg = WeightConfig(q=(1.0, 0.0, 0.0, 0.5, 0.0, 0.0),
                           r=(2.0, 1.0, 1.0), q_l=0.0, q_c=0.0, gamma=0.0)
        ref = np.array([3.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        sched = make_schedule(N, cfg, q_l=0.0, q_c=0.0, gamma=0.0,
                              frenet=False,
                              q_N_eff=[50.0, 0, 0, 10.0, 0, 0],
                              terminal_ref=ref)
        x0 = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        prob = ocp.HorizonProblem(N=N, params=params, x0=x0, schedule=sched,
                                  cfg=cfg, x_ref=ref)
        sol = ocp.solve(prob)

        # oracle: condensed least squares over the acceleration sequence
        A = np.array([[1.0, dt], [0.0, 1.0]])
        B = np.array([0.5 * dt * dt, dt])
        S = np.zeros((N + 1, 2, N))    # d (x_k, v_k) / d a
        z = np.zeros((N + 1, 2))
        z[0] = x0[[vm.IX, vm.IV]]
        for k in range(N):
            z[k + 1] = A @ z[k]
            S[k + 1] = A @ S[k]
            S[k + 1][:, k] += B
        H = 2.0 * 2.0 * np.eye(N)      # input cost r_a = 2
        g = np.zeros(N)
        qw = np.array([1.0, 0.5])
        for k in range(1, N):
            H += 2.0 * S[k].T @ np.diag(qw) @ S[k]
            g += 2.0 * S[k].T @ (qw * (z[k] - ref[[0, 3]]))
        qN = np.array([50.0, 10.0])
        H += 2.0 * S[N].T @ np.diag(qN) @ S[N]
        g += 2.0 * S[N].T @ (qN * (z[N] - ref[[0, 3]]))
        a_star = np.linalg.solve(H, -g)
        states_star = z + np.einsum("kij,j->ki", S, a_star)

        assert np.abs(sol.inputs[:, vm.IA] - a_star).max() < 1e-6
        assert np.abs(sol.states[:, [vm.IX, vm.IV]] - states_star).max() < 1e-6
        assert np.abs(sol.inputs[:, 1:]).max() < 1e-8

    def test_merit_nonincreasing_with_iteration_budget(self):
        path = quarter_circle()
        ref = np.zeros(6)
        ref[:3] = pm.eval_reference(path, path.theta_end)
        sched = make_schedule(15, CFG, q_N_eff=[100, 100, 100, 0, 0, 0],
                              terminal_ref=ref, theta_upper=path.theta_end)
        prob = ocp.HorizonProblem(N=15, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path,
                                  corridor=pm.Corridor.constant(
                                      1.5, path.theta_end))
        merits = []
        for budget in (1, 2, 4, 8, 16):
            sol = ocp.solve(prob, max_iter=budget)
            merits.append(ocp._merit(prob, sol.states, sol.inputs))
        assert all(a >= b - 1e-9 for a, b in zip(merits, merits[1:]))

    def test_solution_not_worse_than_warm_start(self):
        path = straight()
        sched = make_schedule(12, CFG, theta_upper=path.theta_end)
        prob = ocp.HorizonProblem(N=12, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path)
        rng = np.random.default_rng(3)
        U0 = rng.uniform(-0.3, 0.3, size=(12, 3))
        warm = ocp.TrajectorySolution(
            states=vm.rollout_horizon(prob.x0, U0, prob.params), inputs=U0,
            cost=np.nan, kkt_residual=np.nan, iterations=0,
            stage_modes=sched.modes, slack_max=0.0)
        sol = ocp.solve(prob, warm_start=warm)
        m_warm = ocp._merit(prob, warm.states, warm.inputs)
        m_sol = ocp._merit(prob, sol.states, sol.inputs)
        assert m_sol <= m_warm + 1e-9

    def test_determinism(self):
        path = quarter_circle()
        sched = make_schedule(15, CFG, theta_upper=path.theta_end)
        prob = ocp.HorizonProblem(N=15, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path,
                                  corridor=pm.Corridor.constant(
                                      1.5, path.theta_end))
        a = ocp.solve(prob)
        b = ocp.solve(prob)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.states, b.states)
        assert a.cost == b.cost


class TestModeConsistency:
    def test_cartesian_stages_contribute_no_frenet_cost(self):
        path = straight(20.0)
        N = 10
        # first half contouring, second half cartesian
        q_l = np.concatenate([np.full(5, CFG.q_l), np.zeros(5)])
        q_c = np.concatenate([np.full(5, CFG.q_c), np.zeros(5)])
        gam = np.concatenate([np.full(5, CFG.gamma), np.zeros(5)])
        act = np.concatenate([np.ones(5, bool), np.zeros(5, bool)])
        modes = [ObjectiveMode.CONTOURING] * 5 + [ObjectiveMode.CARTESIAN] * 5
        ref = np.array([21.0, 0.5, 0.0, 0.0, 0.0, 0.0])
        sched = WeightSchedule(q_l, q_c, gam, act, modes,
                               np.array([1e4, 1e4, 1e4, 0, 0, 0]), ref, None)
        cor = pm.Corridor.constant(1.5, path.theta_end)
        prob = ocp.HorizonProblem(N=N, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG,
                                  path=path, corridor=cor)
        rng = np.random.default_rng(5)
        U = rng.uniform(-0.3, 0.3, size=(N, 3))
        X = ocp.rollout(prob, U)
        J = ocp.total_objective(prob, X, U)

        # recomputation with only the terms that may be active
        from dockmpc.frenet import frenet_errors
        r = CFG.r_vec()
        J_manual = float(((U * U) @ r).sum())
        for k in range(5):  # contouring stages only
            e = frenet_errors(X[k], path)
            J_manual += q_l[k] * e.e_l ** 2 + q_c[k] * e.e_c ** 2
            J_manual += gam[k] * U[k, vm.IDTHETA]
        J_manual += ocp.terminal_cost(X[N], prob)
        for k in range(1, N + 1):
            for s in ocp.corridor_constraints(X[k], k, prob):
                J_manual += ocp.SLACK_L1 * s + ocp.SLACK_L2 * s * s
        assert J == pytest.approx(J_manual, rel=1e-12, abs=1e-9)


class TestValidation:
    def test_rejects_small_horizon(self):
        with pytest.raises(ValueError):
            ocp.HorizonProblem(N=1, params=vm.ModelParams(), x0=np.zeros(6),
                               schedule=make_schedule(1, CFG), cfg=CFG)

    def test_rejects_schedule_mismatch(self):
        with pytest.raises(ValueError):
            ocp.HorizonProblem(N=5, params=vm.ModelParams(), x0=np.zeros(6),
                               schedule=make_schedule(4, CFG), cfg=CFG)

    def test_rejects_nonfinite_state(self):
        x0 = np.zeros(6)
        x0[0] = np.nan
        with pytest.raises(ValueError):
            ocp.HorizonProblem(N=5, params=vm.ModelParams(), x0=x0,
                               schedule=make_schedule(5, CFG), cfg=CFG)

    def test_warm_start_horizon_mismatch(self):
        sched = make_schedule(5, CFG, frenet=False,
                              q_l=0.0, q_c=0.0, gamma=0.0)
        prob = ocp.HorizonProblem(N=5, params=vm.ModelParams(),
                                  x0=np.zeros(6), schedule=sched, cfg=CFG)
        warm = ocp.TrajectorySolution(
            states=np.zeros((4, 6)), inputs=np.zeros((3, 3)), cost=0.0,
            kkt_residual=0.0, iterations=0, stage_modes=sched.modes,
            slack_max=0.0)
        with pytest.raises(ValueError):
            ocp.solve(prob, warm_start=warm)
