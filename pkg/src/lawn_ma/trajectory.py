"""Trajectory design by successive convex approximation with a trust region,
at fixed beamformers, powers and antenna layouts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from lawn_ma.rate import gains, rates_all
from lawn_ma.wmmse import mmse_receivers

log = logging.getLogger(__name__)

LOG2E = 1.0 / np.log(2.0)
# constraint tightening handed to the inner solver so its round-off stays
# inside the true kinematic limits
_MARGIN = 1e-7


class InfeasibleTrajectory(ValueError):
    pass


def straight_line(q_start, q_end, N):
    return np.linspace(np.asarray(q_start, float), np.asarray(q_end, float), N)


def kinematics(Q, tau):
    """Speeds (n >= 2) and accelerations (n >= 3) in the 1-based slot convention."""
    Q = np.asarray(Q, float)
    v = np.diff(Q, axis=0) / tau
    a = np.diff(v, axis=0) / tau
    return np.linalg.norm(v, axis=1), np.linalg.norm(a, axis=1)


def kinematic_violations(Q, scenario, tol=1e-9):
    s = scenario
    out = []
    if not np.allclose(Q[0], s.start_qI, rtol=0, atol=tol) or not np.allclose(Q[-1], s.end_qF, rtol=0, atol=tol):
        out.append("endpoints")
    speed, acc = kinematics(Q, s.slot_duration_tau)
    if speed.size and speed.max() > s.v_max + tol:
        out.append(f"speed {speed.max():.12g} > {s.v_max}")
    if acc.size and acc.max() > s.a_max + tol:
        out.append(f"acceleration {acc.max():.12g} > {s.a_max}")
    return out


@dataclass
class ScaState:
    """Expansion point of one SCA iteration (angles frozen at Q_l)."""

    Q_l: np.ndarray
    phi_l: float
    h_xi: np.ndarray  # (N, M, K) distance-normalized channels
    c: np.ndarray  # (N, M, R) p_r |w_m^H h_xi_r|^2
    noise_term: np.ndarray  # (N, M) ||w_m||^2 sigma^2
    users: np.ndarray  # (R, 2)
    H: float
    z_l: np.ndarray = field(init=False)  # (N, R) squared distances at Q_l
    E: np.ndarray = field(init=False)  # (N, M, R)

    def __post_init__(self):
        self.z_l = sq_dist(self.Q_l, self.users, self.H)
        A_l = np.einsum("nmr,nr->nm", self.c, 1 / self.z_l) + self.noise_term
        self.E = LOG2E * self.c / self.z_l[:, None, :] ** 2 / A_l[..., None]
        M = self.c.shape[1]
        self.c_off = self.c * (1 - np.eye(M))[None]
        self.A_l = A_l

    @property
    def eta_l(self):
        return -np.log(self.z_l)


def sq_dist(Q, users, H):
    return np.sum((np.asarray(Q)[:, None, :] - users[None]) ** 2, axis=-1) + H**2


def freeze_frv(iterate, model, phi_l=np.inf) -> ScaState:
    h_xi = model.frozen_channels(iterate.Q, iterate.U)
    c = gains(iterate.W, h_xi) * iterate.P[:, None, :]
    noise_term = np.sum(np.abs(iterate.W) ** 2, axis=-1) * model.noise
    return ScaState(np.array(iterate.Q, float), phi_l, h_xi, c, noise_term,
                    model.users, model.H)


def frozen_rates(st: ScaState, Q):
    """Per (slot, user) rate with frozen field responses and exact distances."""
    inv = 1 / sq_dist(Q, st.users, st.H)
    total = np.einsum("nmr,nr->nm", st.c, inv) + st.noise_term
    interf = np.einsum("nmr,nr->nm", st.c_off, inv) + st.noise_term
    return np.log2(total) - np.log2(interf)


def lower_bound_first_term(st: ScaState, Q):
    z = sq_dist(Q, st.users, st.H)
    return np.log2(st.A_l) + np.einsum("nmr,nr->nm", st.E, st.z_l - z)


def linearized_sq_dist(st: ScaState, Q):
    """First-order expansion of d^2 at Q_l (a global under-estimator)."""
    diff = st.Q_l[:, None, :] - st.users[None]
    return st.z_l + 2 * np.einsum("nrc,nc->nr", diff, np.asarray(Q) - st.Q_l)


def upper_bound_second_term(st: ScaState, eta):
    return np.log2(np.einsum("nmr,nr->nm", st.c_off, np.exp(eta)) + st.noise_term)


def tight_eta(st: ScaState, Q):
    lin = linearized_sq_dist(st, Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(lin > 0, -np.log(np.where(lin > 0, lin, 1.0)), np.inf)


def surrogate(st: ScaState, Q):
    """sum over (n, m) of first-term lower bound minus second-term upper
    bound, with the slack at its tight (maximizing) value."""
    eta = tight_eta(st, Q)
    if not np.all(np.isfinite(eta)):
        return -np.inf
    return float(np.sum(lower_bound_first_term(st, Q) - upper_bound_second_term(st, eta)))


def surrogate_grad(st: ScaState, Q):
    Q = np.asarray(Q)
    diff_q = Q[:, None, :] - st.users[None]  # (N, R, 2)
    g = -2 * np.einsum("nmr,nrc->nc", st.E, diff_q)
    lin = linearized_sq_dist(st, Q)
    B = np.einsum("nmr,nr->nm", st.c_off, 1 / lin) + st.noise_term
    coef = np.einsum("nmr,nm->nr", st.c_off, LOG2E / B) / lin**2
    g += 2 * np.einsum("nr,nrc->nc", coef, st.Q_l[:, None, :] - st.users[None])
    return g


def solve_subproblem(st: ScaState, scenario):
    """Maximize the concave surrogate over the kinematic set intersected with
    the trust region. Returns (Q_next, eta_next)."""
    s = scenario
    Q_l = st.Q_l
    N = Q_l.shape[0]
    phi = st.phi_l
    if phi <= 0 or N <= 2:
        return Q_l.copy(), st.eta_l
    vlim = (s.v_max * s.slot_duration_tau) ** 2
    alim = (s.a_max * s.slot_duration_tau**2) ** 2
    nf = N - 2

    def build(x):
        Q = Q_l.copy()
        Q[1:-1] += phi * x.reshape(nf, 2)
        return Q

    def obj(x):
        val = surrogate(st, build(x))
        return 1e30 if not np.isfinite(val) else -val

    def jac(x):
        return -phi * surrogate_grad(st, build(x))[1:-1].ravel()

    # linear maps from Q to differences
    D1 = np.zeros((N - 1, N))
    D1[np.arange(N - 1), np.arange(N - 1)] = -1
    D1[np.arange(N - 1), np.arange(1, N)] = 1
    D2 = np.zeros((N - 2, N))
    for i in range(N - 2):
        D2[i, i:i + 3] = (1, -2, 1)
    dUsers = Q_l[:, None, :] - st.users[None]  # (N, R, 2)

    def cons(x):
        Q = build(x)
        v = D1 @ Q
        a = D2 @ Q
        lin = linearized_sq_dist(st, Q)[1:-1] / st.z_l[1:-1]
        xs = x.reshape(nf, 2)
        return np.concatenate([
            (1 - _MARGIN) - np.sum(v**2, axis=1) / vlim,
            (1 - _MARGIN) - np.sum(a**2, axis=1) / alim,
            1 - np.sum(xs**2, axis=1),
            (lin - 1e-2).ravel(),
        ])

    def cons_jac(x):
        Q = build(x)
        v = D1 @ Q
        a = D2 @ Q
        # d(||D Q||^2)/dQ_free = 2 (D Q) D[:, free] per coordinate
        Jv = -2 / vlim * (v[:, None, :] * D1[:, 1:-1, None]).reshape(N - 1, -1) * phi
        Ja = -2 / alim * (a[:, None, :] * D2[:, 1:-1, None]).reshape(N - 2, -1) * phi
        xs = x.reshape(nf, 2)
        Jt = np.zeros((nf, nf, 2))
        Jt[np.arange(nf), np.arange(nf)] = -2 * xs
        R = st.users.shape[0]
        Jl = np.zeros((nf, R, nf, 2))
        Jl[np.arange(nf), :, np.arange(nf)] = 2 * phi * dUsers[1:-1] / st.z_l[1:-1, :, None]
        return np.vstack([Jv, Ja, Jt.reshape(nf, -1), Jl.reshape(nf * R, -1)])

    x0 = np.zeros(2 * nf)
    res = minimize(obj, x0, jac=jac, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                   options={"maxiter": 200, "ftol": 1e-12})
    Q_new = build(res.x)
    # guard: return the expansion point unless strictly consistent
    ok = (
        np.all(np.linalg.norm(Q_new - Q_l, axis=1) <= phi * (1 + 1e-9))
        and not kinematic_violations(Q_new, s)
        and np.all(linearized_sq_dist(st, Q_new) > 0)
        and surrogate(st, Q_new) >= surrogate(st, Q_l) - 1e-9
    )
    if not ok:
        return Q_l.copy(), st.eta_l
    return Q_new, tight_eta(st, Q_new)


@dataclass
class ScaResult:
    Q: np.ndarray
    W: np.ndarray
    trace: list  # true sum rate after each accepted step, starting value first
    iterations: int
    final_phi: float


def _score(model, iterate, Q, adapt):
    H = model.channels(Q, iterate.U)
    W = mmse_receivers(iterate.P, H, model.noise) if adapt else iterate.W
    R = float(rates_all(W, iterate.P, H, model.noise).sum())
    if adapt:
        # never score below the frozen beamformers
        R_fixed = float(rates_all(iterate.W, iterate.P, H, model.noise).sum())
        if R_fixed > R:
            return R_fixed, iterate.W
    return R, W


def true_sum_rate(model, iterate, Q):
    H = model.channels(Q, iterate.U)
    return float(rates_all(iterate.W, iterate.P, H, model.noise).sum())


def sca_solve(iterate, model, scenario) -> ScaResult:
    """Trust-region SCA loop.

    A candidate is accepted only if the exact sum rate (angles re-evaluated at
    the new waypoints) does not drop; otherwise the radius shrinks. With
    ``adapt_receivers`` the candidate is scored, and returned, with MMSE
    combiners re-fitted to it, so the frozen beamformers' phase alignment does
    not veto every move.
    """
    cfg = scenario.sca
    if kinematic_violations(iterate.Q, scenario):
        raise InfeasibleTrajectory("no feasible trajectory: initial waypoints violate kinematics")
    phi = cfg.phi0 if cfg.phi0 is not None else scenario.v_max * scenario.slot_duration_tau / 2
    cur = iterate.copy()
    R, cur.W = _score(model, cur, cur.Q, scenario.adapt_receivers)
    trace = [R]
    it = 0
    for it in range(1, cfg.l_max + 1):
        if phi < cfg.phi_min:
            break
        st = freeze_frv(cur, model, phi)
        Q_new, _ = solve_subproblem(st, scenario)
        if np.array_equal(Q_new, cur.Q):
            # expansion point is optimal for the surrogate
            break
        R_new, W_new = _score(model, cur, Q_new, scenario.adapt_receivers)
        if R_new >= R:
            gain = R_new - R
            cur.Q, cur.W = Q_new, W_new
            R = R_new
            trace.append(R)
            if gain < cfg.eps:
                break
        else:
            phi *= cfg.shrink
    return ScaResult(cur.Q, cur.W, trace, it, phi)
