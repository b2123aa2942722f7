"""Benchmark antenna placement by minorization-maximization.

Each antenna is moved in turn with the others held fixed. The weighted-MMSE
surrogate of the slot is a quadratic form in the antenna's field response
vector; it is minorized first by an affine function of that vector and then
by a concave quadratic in the antenna position, whose maximizer over the
region (with the pairwise spacing constraints replaced by sufficient affine
ones) is found exactly.

Field response vectors of the moving antenna are stacked over all users:
``g = [g_1; ...; g_M]`` with ``g_r[i] = exp(j k u . n_{r,i})`` and
``h_{r,k} = sum_i sigma_{r,i} conj(g_r[i])``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from lawn_ma.rate import rates_all
from lawn_ma.wmmse import LN2, mmse_receivers, surrogate_rate, update_beta, update_omega

log = logging.getLogger(__name__)


@dataclass
class MmTerms:
    """R_dot(g) = g^H E g + Re{F^H g} + upsilon for one user (or summed)."""

    E: np.ndarray  # (ML, ML) Hermitian, negative semidefinite
    F: np.ndarray  # (ML,)
    upsilon: float
    zeta: float  # curvature with zeta I <= E

    def value(self, g):
        return float(np.real(np.vdot(g, self.E @ g)) + np.real(np.vdot(self.F, g)) + self.upsilon)

    def __add__(self, other: "MmTerms") -> "MmTerms":
        return MmTerms(self.E + other.E, self.F + other.F, self.upsilon + other.upsilon,
                       self.zeta + other.zeta)


def frv(u, dirs, kwave):
    """Stacked field response of one antenna at u: dirs (M, L, 2) -> (M*L,)."""
    return np.exp(1j * kwave * (dirs @ np.asarray(u, float))).ravel()


def _channels(U, sig, dirs, kwave):
    phase = np.exp(-1j * kwave * np.einsum("kc,mlc->mkl", U, dirs))
    return np.einsum("mkl,ml->mk", phase, sig)


def build_terms(m, k, W, p, U, sig, dirs, kwave, beta, omega, noise) -> MmTerms:
    """Terms of user m's surrogate as a function of antenna k's stacked FRV."""
    M, Lp = sig.shape
    H = _channels(U, sig, dirs, kwave)  # (M, K)
    w = W[m]
    wk = w[k]
    mask = np.ones(U.shape[0], dtype=bool)
    mask[k] = False
    a = H[:, mask] @ w[mask].conj()  # a_r = sum_{i != k} conj(w_i) h_{r,i}
    b2 = abs(beta[m]) ** 2
    om = omega[m]
    sq = np.sqrt(p[m])

    E = np.zeros((M * Lp, M * Lp), dtype=complex)
    F = np.zeros(M * Lp, dtype=complex)
    for r in range(M):
        s = sig[r]
        blk = slice(r * Lp, (r + 1) * Lp)
        E[blk, blk] = -om * b2 * p[r] * abs(wk) ** 2 * np.outer(s, s.conj())
        F[blk] = -om * b2 * p[r] * 2 * np.conj(a[r]) * np.conj(wk) * s
    F[m * Lp:(m + 1) * Lp] += 2 * om * np.conj(beta[m]) * sq * np.conj(wk) * sig[m]
    ups = (np.log(om) - om + 1 - om * b2 * np.vdot(w, w).real * noise
           + 2 * om * np.real(np.conj(beta[m]) * sq * a[m])
           - om * b2 * np.sum(p * np.abs(a) ** 2))
    zeta = -om * b2 * abs(wk) ** 2 * np.sum(p * np.sum(np.abs(sig) ** 2, axis=1))
    return MmTerms(E / LN2, F / LN2, float(ups / LN2), float(zeta / LN2))


def slot_terms(k, W, p, U, sig, dirs, kwave, beta, omega, noise) -> MmTerms:
    terms = [build_terms(m, k, W, p, U, sig, dirs, kwave, beta, omega, noise)
             for m in range(W.shape[0])]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def checked_zeta(terms: MmTerms, tol=1e-12):
    """The curvature bound, replaced by the exact smallest eigenvalue of E
    if it is not below it."""
    lam = float(np.linalg.eigvalsh(terms.E)[0])
    if terms.zeta <= lam + tol * max(1.0, abs(lam)):
        return terms.zeta
    log.warning("curvature bound above lambda_min(E); using the eigenvalue")
    return lam


def lemma1_linearize(terms: MmTerms, g_l, zeta=None):
    """Affine minorizer Re{J^H g} + const of the quadratic, valid on the
    unit-modulus set and tight at g_l."""
    z = terms.zeta if zeta is None else zeta
    n = g_l.size
    J = 2 * (terms.E - z * np.eye(n)) @ g_l + terms.F
    const = z * n + float(np.real(np.vdot(g_l, (z * np.eye(n) - terms.E) @ g_l))) + terms.upsilon
    return J, const


def psi(J, u, dirs, kwave):
    return float(np.real(np.vdot(J, frv(u, dirs, kwave))))


def psi_grad(J, u, dirs, kwave):
    g = frv(u, dirs, kwave)
    n = dirs.reshape(-1, 2)
    return np.real(1j * kwave * np.conj(J) * g) @ n


def curvature(J, kwave):
    """Coefficient c of the -c ||u - u_l||^2 term in the position minorizer."""
    return kwave**2 * float(np.sum(np.abs(J)))


def lemma2_minorizer(J, u_l, dirs, kwave):
    """Concave quadratic lower bound of psi around u_l, as a callable."""
    u_l = np.asarray(u_l, float)
    p0 = psi(J, u_l, dirs, kwave)
    gr = psi_grad(J, u_l, dirs, kwave)
    c = curvature(J, kwave)

    def model(u):
        d = np.asarray(u, float) - u_l
        return p0 + gr @ d - c * (d @ d)

    return model


def distance_constraints(u_l, others, d_min):
    """Affine sufficient conditions n^T u >= b for ||u - u_o|| >= d_min."""
    cons = []
    for o in np.asarray(others, float).reshape(-1, 2):
        diff = np.asarray(u_l, float) - o
        nrm = np.linalg.norm(diff)
        if nrm == 0:
            raise ValueError("expansion point coincides with a fixed antenna")
        n = diff / nrm
        cons.append((n, d_min + n @ o))
    return cons


def _separate(u_l, others, d_min, side):
    """Nudge u_l off any antenna it coincides with (deterministic direction)."""
    u = np.array(u_l, float)
    for o in np.asarray(others, float).reshape(-1, 2):
        if np.array_equal(u, o):
            centre = np.full(2, side / 2)
            d = centre - u
            d = d / np.linalg.norm(d) if np.linalg.norm(d) > 0 else np.array([1.0, 0.0])
            u = u + 1e-6 * d_min * d
    return u


def project_polygon(target, cons, tol=1e-12):
    """Euclidean projection onto {u : n^T u >= b for every (n, b)}, exact by
    enumerating the interior, every edge line and every vertex.
    Returns None if the set is empty."""
    target = np.asarray(target, float)

    def feasible(u):
        return all(n @ u >= b - tol for n, b in cons)

    if feasible(target):
        return target
    cands = []
    for n, b in cons:
        cands.append(target + (b - n @ target) / (n @ n) * n)
    for (n1, b1), (n2, b2) in itertools.combinations(cons, 2):
        A = np.array([n1, n2])
        if abs(np.linalg.det(A)) > 1e-14:
            cands.append(np.linalg.solve(A, np.array([b1, b2])))
    best, dist = None, np.inf
    for c in cands:
        if feasible(c):
            d = np.linalg.norm(c - target)
            if d < dist:
                best, dist = c, d
    return best


def box_constraints(side):
    return [(np.array([1.0, 0.0]), 0.0), (np.array([0.0, 1.0]), 0.0),
            (np.array([-1.0, 0.0]), -side), (np.array([0.0, -1.0]), -side)]


@dataclass
class MmSlotResult:
    layout: np.ndarray
    W: np.ndarray
    trace: list = field(default_factory=list)  # (sweep, true slot sum rate)
    sweeps: int = 0


def mm_solve_slot(W, p, U, sig, dirs, kwave, noise, scenario) -> MmSlotResult:
    cfg = scenario.mm
    side, d_min = scenario.region_side_L, scenario.d_min
    W = np.array(W, dtype=complex)
    U = np.array(U, dtype=float)
    K = U.shape[0]

    def H_of(U_):
        return _channels(U_, sig, dirs, kwave)

    def true_rate(W_, U_):
        return float(rates_all(W_, p, H_of(U_), noise).sum())

    res = MmSlotResult(U, W)
    rate = true_rate(W, U)
    res.trace.append((0, rate))
    for sweep in range(1, cfg.max_sweeps + 1):
        start = rate
        if scenario.adapt_receivers:
            Wm = mmse_receivers(p, H_of(U), noise)
            if true_rate(Wm, U) >= rate:
                W = Wm
        beta = omega = None
        for k in range(K):
            H = H_of(U)
            if beta is None or cfg.per_antenna_refresh:
                beta = update_beta(W, p, H, noise)
                omega = update_omega(W, p, H, noise)
            base = float(surrogate_rate(W, p, H, beta, omega, noise).sum())
            others = np.delete(U, k, axis=0)
            u_l = _separate(U[k], others, d_min, side)
            terms = slot_terms(k, W, p, U, sig, dirs, kwave, beta, omega, noise)
            zeta = checked_zeta(terms)
            J, _ = lemma1_linearize(terms, frv(u_l, dirs, kwave), zeta)
            c = curvature(J, kwave)
            if c == 0:
                continue
            target = u_l + psi_grad(J, u_l, dirs, kwave) / (2 * c)
            cons = box_constraints(side) + (distance_constraints(u_l, others, d_min) if K > 1 else [])
            u_new = project_polygon(target, cons)
            if u_new is None:
                continue
            U_try = U.copy()
            U_try[k] = np.clip(u_new, 0.0, side)
            val = float(surrogate_rate(W, p, H_of(U_try), beta, omega, noise).sum())
            if val >= base:
                U = U_try
        rate = true_rate(W, U)
        res.trace.append((sweep, rate))
        res.sweeps = sweep
        if abs(rate - start) < cfg.eps:
            break
    res.layout, res.W = U, W
    return res


def mm_placement(iterate, model, scenario, key=0):
    """MM placement on every slot; ``key`` is unused (deterministic engine)."""
    from lawn_ma.placement_pso import PlacementResult

    U = iterate.U.copy()
    W = iterate.W.copy()
    out = PlacementResult(U, W)
    for n in range(U.shape[0]):
        sig, dirs = model.slot_paths(n, iterate.Q[n])
        r = mm_solve_slot(iterate.W[n], iterate.P[n], iterate.U[n], sig, dirs, model.kwave,
                          model.noise, scenario)
        U[n], W[n] = r.layout, r.W
        out.trace.extend((n, j, f) for j, f in r.trace)
    return out
