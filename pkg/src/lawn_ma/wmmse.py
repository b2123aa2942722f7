"""Weighted-MMSE block coordinate ascent over receive beamformers and user
powers at a fixed trajectory and antenna layout.

All per-slot routines take ``W`` (M, K), ``p`` (M,), ``H`` (M, K) for the slot.
The surrogate is kept in bits: (ln w - w e + 1) / ln 2, which equals the rate
at the closed-form auxiliaries and never exceeds it elsewhere.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from lawn_ma.rate import gains, rates_all, sinr_all

log = logging.getLogger(__name__)

LN2 = np.log(2.0)
COND_LIMIT = 1e12


class IllConditioned(np.linalg.LinAlgError):
    pass


def _interference_plus_noise(W, p, H, noise):
    # sum_r p_r |w_m^H h_r|^2 + ||w_m||^2 sigma^2, per m
    return np.einsum("...mr,...r->...m", gains(W, H), p) + np.sum(np.abs(W) ** 2, axis=-1) * noise


def _wh(W, H):
    # w_m^H h_m
    return np.einsum("...mk,...mk->...m", W.conj(), H)


def update_beta(W, p, H, noise):
    return np.sqrt(p) * _wh(W, H) / _interference_plus_noise(W, p, H, noise)


def update_omega(W, p, H, noise):
    return 1.0 + sinr_all(W, p, H, noise)


def mse(W, p, H, beta, noise):
    """Per-user MSE 1 - 2 Re{b* sqrt(p) w^H h} + |b|^2 (total received power)."""
    return (1 - 2 * np.real(beta.conj() * np.sqrt(p) * _wh(W, H))
            + np.abs(beta) ** 2 * _interference_plus_noise(W, p, H, noise))


def surrogate_rate(W, p, H, beta, omega, noise):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    return (np.log(omega) - omega * mse(W, p, H, beta, noise) + 1) / LN2


def covariance(p, H, noise):
    """sum_r p_r h_r h_r^H + sigma^2 I."""
    K = H.shape[-1]
    return np.einsum("...r,...rk,...rl->...kl", p, H, H.conj()) + noise * np.eye(K)


def beamformer_for_dual(m, p, H, beta, omega, noise, lam):
    """Stationary point of the Lagrangian for a given multiplier (one slot)."""
    C = covariance(p, H, noise)
    A = omega[m] * abs(beta[m]) ** 2 * C + lam * np.eye(C.shape[0])
    b = omega[m] * np.sqrt(p[m]) * np.conj(beta[m]) * H[m]
    return np.linalg.solve(A, b)


def update_beamformer(m, W, p, H, beta, omega, noise, tol=1e-10):
    """Exact maximizer of user m's surrogate over ||w|| <= 1.

    Accepts leading slot axes. Returns (w, lam) with lam the multiplier of
    the norm constraint.
    """
    pm = p[..., m]
    bm = beta[..., m]
    idle = (pm <= 0) | (bm == 0)
    c = omega[..., m] * np.abs(bm) ** 2
    # lam = c * nu keeps tiny powers from underflowing:
    # w = (C + nu I)^-1 sqrt(p) h / beta
    evals, V = np.linalg.eigh(covariance(p, H, noise))
    if np.any(evals[..., 0] <= 0) or np.any(evals[..., -1] / evals[..., 0] > COND_LIMIT):
        raise IllConditioned("ill-conditioned receive covariance")
    d = np.sqrt(pm)[..., None] * H[..., m, :] / np.where(idle, 1.0, bm)[..., None]
    z = np.einsum("...kl,...k->...l", V.conj(), d)
    az2 = np.abs(z) ** 2

    def norm(nu):
        return np.sqrt(np.sum(az2 / (evals + nu[..., None]) ** 2, axis=-1))

    nu = np.zeros(pm.shape)
    active = (norm(nu) > 1.0) & ~idle
    if np.any(active):
        lo = np.zeros(pm.shape)
        hi = np.full(pm.shape, float(noise))
        for _ in range(2000):
            grow = active & (norm(hi) >= 1.0)
            if not np.any(grow):
                break
            lo = np.where(grow, hi, lo)
            hi = np.where(grow, 2 * hi, hi)
        else:
            raise FloatingPointError("dual bracketing failed")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            over = norm(mid) > 1.0
            lo = np.where(over, mid, lo)
            hi = np.where(over, hi, mid)
            if np.all(~active | (1.0 - norm(hi) < tol) | (hi - lo <= 1e-15 * hi)):
                break
        nu = np.where(active, hi, 0.0)
    w = np.einsum("...kl,...l->...k", V, z / (evals + nu[..., None]))
    w = np.where(idle[..., None], W[..., m, :], w)
    return w, np.where(idle, 0.0, c * nu)


def update_powers(W, H, beta, omega, p_max):
    """Exact maximizer of the slot surrogate over sqrt(p) in [0, sqrt(p_max)].

    Returns (p, degenerate) where ``degenerate[m]`` marks users whose power
    does not enter the surrogate (all |w_r^H h_m| = 0); those get p_max.
    """
    G = gains(W, H)  # [r, m] = |w_r^H h_m|^2
    den = np.einsum("...r,...r,...rm->...m", omega, np.abs(beta) ** 2, G)
    num = omega * np.real(np.conj(beta) * _wh(W, H))
    degenerate = den <= 0
    x = np.where(degenerate, np.sqrt(p_max), num / np.where(degenerate, 1.0, den))
    x = np.clip(x, 0.0, np.sqrt(p_max))
    if np.any(degenerate):
        log.debug("power update: %d users with zero effective gain", int(degenerate.sum()))
    # the upper clamp returns p_max exactly rather than sqrt(p_max)**2
    return np.where(x >= np.sqrt(p_max), p_max, x**2), degenerate


@dataclass
class BcaResult:
    W: np.ndarray
    P: np.ndarray
    # rows of (slot, sweep, surrogate, true_sum_rate)
    trace: list = field(default_factory=list)
    sweeps: int = 0


def bca_sweep(W, p, H, noise, p_max):
    """One (beta, omega) -> W -> p pass. Returns (W, p, surrogate per slot)."""
    W = W.copy()
    beta = update_beta(W, p, H, noise)
    omega = update_omega(W, p, H, noise)
    for m in range(W.shape[-2]):
        W[..., m, :], _ = update_beamformer(m, W, p, H, beta, omega, noise)
    p, _ = update_powers(W, H, beta, omega, p_max)
    return W, p, surrogate_rate(W, p, H, beta, omega, noise).sum(axis=-1)


def bca_solve(W, P, H, noise, p_max, eps=1e-6, j_max=200) -> BcaResult:
    """Block ascent on every slot. Slots are independent and each stops on
    its own criterion; they are simply advanced together."""
    W = np.array(W, dtype=complex)
    P = np.array(P, dtype=float)
    prev = rates_all(W, P, H, noise).sum(axis=-1)
    live = np.ones(W.shape[0], dtype=bool)
    res = BcaResult(W, P)
    for j in range(1, j_max + 1):
        idx = np.flatnonzero(live)
        Wn, pn, sur = bca_sweep(W[idx], P[idx], H[idx], noise, p_max)
        W[idx], P[idx] = Wn, pn
        true = rates_all(Wn, pn, H[idx], noise).sum(axis=-1)
        for a, n in enumerate(idx):
            res.trace.append((int(n), j, float(sur[a]), float(true[a])))
        res.sweeps = j
        done = np.abs(sur - prev[idx]) < eps
        prev[idx] = sur
        live[idx[done]] = False
        if not live.any():
            break
    res.trace.sort(key=lambda r: (r[0], r[1]))
    res.W, res.P = W, P
    return res


def bca_slot(W, p, H, noise, p_max, eps=1e-6, j_max=200):
    res = bca_solve(W[None], p[None], H[None], noise, p_max, eps, j_max)
    return res.W[0], res.P[0], res.trace


def matched_filters(H):
    nrm = np.linalg.norm(H, axis=-1, keepdims=True)
    return H / np.where(nrm > 0, nrm, 1.0)


def mmse_receivers(P, H, noise):
    """Unit-norm MMSE combiners C^-1 h_m, the per-user SINR maximizers at
    fixed powers. Batched over leading axes."""
    C = covariance(P, H, noise)
    X = np.linalg.solve(C[..., None, :, :], H[..., None])[..., 0]  # (..., M, K)
    return matched_filters(X)
