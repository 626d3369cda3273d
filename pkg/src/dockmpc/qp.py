"""Dense primal-dual interior-point solver for strictly convex QPs.

Solves

    min 0.5 z'Pz + q'z   s.t.   Gz <= h,   lb <= z <= ub

with P symmetric positive definite. Variable bounds are handled as
diagonal barrier contributions, so only the general rows G enter the
normal-equations product; the SQP layer keeps G small by passing only
near-active rows. Mehrotra-style predictor-corrector with infeasible
start; problem sizes here make dense Cholesky the right tool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class QPFailure(RuntimeError):
    """The interior-point iteration did not reach the requested tolerance."""


@dataclass
class QPResult:
    z: np.ndarray
    lam: np.ndarray      # multipliers for the general rows Gz <= h
    lam_lb: np.ndarray   # multipliers for z >= lb (full-length, zero where unbounded)
    lam_ub: np.ndarray   # multipliers for z <= ub
    iterations: int
    gap: float


def solve_qp(P, q, G=None, h=None, lb=None, ub=None,
             tol: float = 1e-9, max_iter: int = 60) -> QPResult:
    n = len(q)
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)
    if G is None or len(G) == 0:
        G = np.zeros((0, n))
        h = np.zeros(0)
    else:
        G = np.asarray(G, dtype=float)
        h = np.asarray(h, dtype=float)
    m = len(h)

    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    il = np.isfinite(lb)
    iu = np.isfinite(ub)
    nl, nu = int(il.sum()), int(iu.sum())
    m_total = m + nl + nu

    if m_total == 0:
        z = cho_solve(cho_factor(P), -q)
        return QPResult(z, np.zeros(0), np.zeros(n), np.zeros(n), 0, 0.0)

    # start strictly inside the bound box where possible
    z = np.zeros(n)
    both = il & iu
    z[both] = 0.5 * (lb[both] + ub[both])
    z[il & ~iu] = lb[il & ~iu] + 1.0
    z[~il & iu] = ub[~il & iu] - 1.0

    s_g = np.maximum(h - G @ z, 1.0)
    s_l = np.maximum(z[il] - lb[il], 1.0)
    s_u = np.maximum(ub[iu] - z[iu], 1.0)
    l_g = np.ones(m)
    l_l = np.ones(nl)
    l_u = np.ones(nu)
    scale = 1.0 + float(np.abs(q).max()) if n else 1.0

    best = None           # (error, z, l_g, l_l, l_u, mu)
    best_err = np.inf
    stall_count = 0

    def residuals():
        r_d = P @ z + q
        if m:
            r_d += G.T @ l_g
        r_d[il] -= l_l
        r_d[iu] += l_u
        r_g = (G @ z + s_g - h) if m else np.zeros(0)
        r_l = -z[il] + s_l + lb[il]
        r_u = z[iu] + s_u - ub[iu]
        return r_d, r_g, r_l, r_u

    for it in range(1, max_iter + 1):
        if not (np.isfinite(z).all() and np.isfinite(l_g).all()
                and np.isfinite(s_g).all()):
            break  # iterates diverged (e.g. the problem is infeasible)
        r_d, r_g, r_l, r_u = residuals()
        mu = (s_g @ l_g + s_l @ l_l + s_u @ l_u) / m_total
        pr = max(
            np.abs(r_g).max() if m else 0.0,
            np.abs(r_l).max() if nl else 0.0,
            np.abs(r_u).max() if nu else 0.0,
        )
        # dual residual is measured relative to the gradient magnitude,
        # not just |q|: ill-conditioned P gives large cancellation there
        scale_d = 1.0 + float(np.abs(q).max() + np.abs(P @ z).max())
        err = max(np.abs(r_d).max() / scale_d, pr / scale, mu / scale)
        if err < best_err:
            best_err = err
            best = (z.copy(), l_g.copy(), l_l.copy(), l_u.copy(), mu, it)
        if err < tol:
            return _result(z, l_g, l_l, l_u, il, iu, n, it, mu)
        # once complementarity has converged, the dual residual can sit on
        # a cancellation floor; further iterations only shrink mu
        if mu < tol * scale:
            stall_count += 1
            if stall_count >= 8:
                break
        else:
            stall_count = 0

        w_g = l_g / s_g
        w_l = l_l / s_l
        w_u = l_u / s_u
        K = P.copy()
        if m:
            K += (G.T * w_g) @ G
        K[np.arange(n)[il], np.arange(n)[il]] += w_l
        K[np.arange(n)[iu], np.arange(n)[iu]] += w_u
        reg = 1e-12 * (np.trace(K) / n + 1.0)
        for _ in range(16):
            try:
                Kf = cho_factor(K, check_finite=False)
                break
            except np.linalg.LinAlgError:
                K[np.diag_indices_from(K)] += reg
                reg *= 10.0
        else:
            break  # cannot factor even with heavy regularization

        def kkt_step(rc_g, rc_l, rc_u):
            rhs = -r_d
            if m:
                rhs += G.T @ ((rc_g - l_g * r_g) / s_g)
            # lower bounds: rows -z + s = -lb  (G_l = -I on selected entries)
            rhs[il] -= (rc_l - l_l * r_l) / s_l
            rhs[iu] += (rc_u - l_u * r_u) / s_u
            dz = cho_solve(Kf, rhs, check_finite=False)
            ds_g = -r_g - (G @ dz if m else 0.0)
            ds_l = -r_l + dz[il]
            ds_u = -r_u - dz[iu]
            dl_g = (-rc_g - l_g * ds_g) / s_g
            dl_l = (-rc_l - l_l * ds_l) / s_l
            dl_u = (-rc_u - l_u * ds_u) / s_u
            return dz, (ds_g, ds_l, ds_u), (dl_g, dl_l, dl_u)

        # predictor
        dz_a, ds_a, dl_a = kkt_step(s_g * l_g, s_l * l_l, s_u * l_u)
        alpha_a = _step_length((s_g, s_l, s_u), ds_a, (l_g, l_l, l_u), dl_a)
        mu_aff = (
            (s_g + alpha_a * ds_a[0]) @ (l_g + alpha_a * dl_a[0])
            + (s_l + alpha_a * ds_a[1]) @ (l_l + alpha_a * dl_a[1])
            + (s_u + alpha_a * ds_a[2]) @ (l_u + alpha_a * dl_a[2])
        ) / m_total
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        dz, ds, dl = kkt_step(
            s_g * l_g + ds_a[0] * dl_a[0] - sigma * mu,
            s_l * l_l + ds_a[1] * dl_a[1] - sigma * mu,
            s_u * l_u + ds_a[2] * dl_a[2] - sigma * mu,
        )
        alpha = 0.99 * _step_length((s_g, s_l, s_u), ds, (l_g, l_l, l_u), dl)
        z = z + alpha * dz
        s_g = s_g + alpha * ds[0]
        s_l = s_l + alpha * ds[1]
        s_u = s_u + alpha * ds[2]
        l_g = l_g + alpha * dl[0]
        l_l = l_l + alpha * dl[1]
        l_u = l_u + alpha * dl[2]

    if best is not None and best_err < 1e-6:
        zb, lgb, llb, lub, mub, itb = best
        return _result(zb, lgb, llb, lub, il, iu, n, itb, mub)
    raise QPFailure(
        f"interior point stalled: best relative error {best_err:.2e}"
    )


def _result(z, l_g, l_l, l_u, il, iu, n, it, mu):
    lam_lb = np.zeros(n)
    lam_ub = np.zeros(n)
    lam_lb[il] = l_l
    lam_ub[iu] = l_u
    return QPResult(z, l_g, lam_lb, lam_ub, it, float(mu))


def _step_length(slacks, dslacks, lams, dlams) -> float:
    vals = np.concatenate(slacks + lams)
    dirs = np.concatenate(dslacks + dlams)
    neg = dirs < 0
    if not neg.any():
        return 1.0
    return min(1.0, float((-vals[neg] / dirs[neg]).min()))
