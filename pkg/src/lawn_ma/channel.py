"""Far-field multipath channel between ground users and the movable-antenna
array on the aerial receiver."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from lawn_ma.scenario import Scenario


@dataclass(frozen=True)
class PathAngles:
    theta: np.ndarray  # (L,) vertical AoA
    phi: np.ndarray  # (L,) horizontal AoA


@dataclass(frozen=True)
class PathResponse:
    sigma: np.ndarray  # (L,) complex path amplitudes
    alpha: float
    g_small: np.ndarray  # (L,) complex small-scale coefficients


def distance(q, s, H):
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    return np.sqrt(np.sum((q - s) ** 2, axis=-1) + H**2)


def nominal_angles(q, s, H, strict=False):
    """Vertical and horizontal AoA of the direct path from ground point s to
    the receiver above q. Works elementwise over leading axes.

    The azimuth is measured from the y axis. By default its sign follows
    x_q - x_s so that (cos, sin) recover the true direction; ``strict`` keeps
    the unsigned arccos.
    """
    diff = np.asarray(q, dtype=float) - np.asarray(s, dtype=float)
    horiz = np.hypot(diff[..., 0], diff[..., 1])
    theta = np.arcsin(H / np.sqrt(horiz**2 + H**2))
    safe = np.where(horiz > 0, horiz, 1.0)
    phi = np.arccos(np.clip(diff[..., 1] / safe, -1.0, 1.0))
    if not strict:
        phi = np.where(diff[..., 0] < 0, -phi, phi)
    phi = np.where(horiz > 0, phi, 0.0)
    return theta, phi


def _shape(size):
    return (size,) if isinstance(size, (int, np.integer)) else tuple(size)


def sample_offsets(rng, Delta, L, size=()):
    """Uniform per-path angular offsets in (-Delta/2, Delta/2)."""
    shape = _shape(size) + (L,)
    d_theta = rng.uniform(-Delta / 2, Delta / 2, size=shape)
    d_phi = rng.uniform(-Delta / 2, Delta / 2, size=shape)
    return d_theta, d_phi


def sample_path_angles(rng, theta_nom, phi_nom, Delta, L) -> PathAngles:
    d_theta, d_phi = sample_offsets(rng, Delta, L)
    return PathAngles(theta=theta_nom + d_theta, phi=phi_nom + d_phi)


def directions(theta, phi):
    """Projection vectors (sin t cos p, sin t sin p), stacked on a new last axis."""
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi)], axis=-1)


def phase_difference(u, theta, phi):
    u = np.asarray(u, dtype=float)
    return u[..., 0] * np.sin(theta) * np.cos(phi) + u[..., 1] * np.sin(theta) * np.sin(phi)


def receive_frv(u, angles: PathAngles, wavelength):
    rho = phase_difference(u, np.asarray(angles.theta), np.asarray(angles.phi))
    return np.exp(1j * 2 * np.pi / wavelength * rho)


def small_scale(rng, kappa, L, size=()):
    """Rician small-scale coefficients normalized so that E[sum_i |g_i|^2] = L.

    Path 0 carries the deterministic line-of-sight part. With a single path
    the diffuse part rides on the same path (classic Rician amplitude).
    """
    size = _shape(size)
    if np.isinf(kappa):
        g = np.zeros(size + (L,), dtype=complex)
        g[..., 0] = np.sqrt(L)
        return g
    cn = (rng.standard_normal(size + (L,)) + 1j * rng.standard_normal(size + (L,))) / np.sqrt(2)
    g = np.empty(size + (L,), dtype=complex)
    if L == 1:
        g[..., 0] = np.sqrt(kappa / (kappa + 1)) + np.sqrt(1 / (kappa + 1)) * cn[..., 0]
    else:
        g[..., 0] = np.sqrt(kappa * L / (kappa + 1))
        g[..., 1:] = np.sqrt(L / ((kappa + 1) * (L - 1))) * cn[..., 1:]
    return g


def path_response(rng, alpha, kappa, L) -> PathResponse:
    g = small_scale(rng, kappa, L)
    return PathResponse(sigma=np.sqrt(alpha / L) * g, alpha=float(alpha), g_small=g)


def channel_vector(layout, angles: PathAngles, response: PathResponse, wavelength):
    """h_k = sum_i sigma_i exp(-j 2pi/lambda rho(u_k, theta_i, phi_i))."""
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    n = directions(np.asarray(angles.theta), np.asarray(angles.phi))  # (L, 2)
    phase = np.exp(-1j * 2 * np.pi / wavelength * (layout @ n.T))  # (K, L)
    return phase @ response.sigma


def channel_vector_matrix_form(layout, angles: PathAngles, response: PathResponse, wavelength):
    """Same channel written as G^H Sigma f, with G the receive field response
    matrix and f the all-ones transmit response."""
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    G = np.stack([receive_frv(u, angles, wavelength) for u in layout], axis=1)  # (L, K)
    Sigma = np.diag(response.sigma)
    f = np.ones(len(response.sigma))
    return G.conj().T @ Sigma @ f


class ChannelModel:
    """One mission's channel realization.

    Per-path angular offsets are drawn once per user, small-scale fading once
    per (user, slot); the nominal angles and the path loss follow the receiver
    position. Everything is a deterministic function of the scenario seed.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        s = scenario
        self.users = s.users
        M, N, L = s.num_users_M, s.num_slots_N, s.num_paths_L
        rng_ang = np.random.default_rng([1, s.rng_seed])
        rng_fad = np.random.default_rng([2, s.rng_seed])
        self.d_theta, self.d_phi = sample_offsets(rng_ang, s.angular_spread_Delta, L, size=M)
        self.g_small = small_scale(rng_fad, s.rician_kappa, L, size=(N, M))  # (N, M, L)
        self.kwave = 2 * np.pi / s.wavelength_lambda
        self.H = s.altitude_H
        self.noise = s.noise_power

    # -- geometry ---------------------------------------------------------
    def distances(self, Q):
        """(N, M) receiver-user distances for waypoints Q (N, 2)."""
        return distance(np.asarray(Q)[:, None, :], self.users[None, :, :], self.H)

    def angles(self, Q):
        """Per-path (theta, phi), each (N, M, L)."""
        th, ph = nominal_angles(np.asarray(Q)[:, None, :], self.users[None], self.H,
                                strict=self.scenario.strict_azimuth)
        return th[..., None] + self.d_theta[None], ph[..., None] + self.d_phi[None]

    def slot_angles(self, n, q):
        th, ph = nominal_angles(np.asarray(q)[None, :], self.users, self.H,
                                strict=self.scenario.strict_azimuth)
        return th[:, None] + self.d_theta, ph[:, None] + self.d_phi

    def sigma(self, Q):
        """(N, M, L) complex path amplitudes."""
        d = self.distances(Q)
        L = self.scenario.num_paths_L
        alpha = self.scenario.h0 / d**2
        return np.sqrt(alpha / L)[..., None] * self.g_small

    def directions(self, Q):
        th, ph = self.angles(Q)
        return directions(th, ph)  # (N, M, L, 2)

    # -- channels ---------------------------------------------------------
    def channels(self, Q, U):
        """(N, M, K) channel vectors for waypoints Q (N, 2) and layouts U (N, K, 2)."""
        dirs = self.directions(Q)
        sig = self.sigma(Q)
        return _assemble(np.asarray(U, dtype=float), dirs, sig, self.kwave)

    def slot_paths(self, n, q):
        """Path amplitudes (M, L) and direction vectors (M, L, 2) of slot n
        with the receiver above q."""
        th, ph = self.slot_angles(n, q)
        d = distance(np.asarray(q)[None, :], self.users, self.H)
        sig = np.sqrt(self.scenario.h0 / d**2 / self.scenario.num_paths_L)[:, None] * self.g_small[n]
        return sig, directions(th, ph)

    def slot_channels(self, n, q, layouts):
        """Channels of slot n for one or many layouts.

        layouts: (..., K, 2) -> (..., M, K).
        """
        sig, dirs = self.slot_paths(n, q)
        phase = np.exp(-1j * self.kwave * np.einsum("...kc,mlc->...mkl", layouts, dirs))
        return np.einsum("...mkl,ml->...mk", phase, sig)

    def frozen_channels(self, Q_ref, U):
        """Distance-normalized channels with angles frozen at Q_ref: h = h_xi / d."""
        dirs = self.directions(Q_ref)
        L = self.scenario.num_paths_L
        sig = np.sqrt(self.scenario.h0 / L) * self.g_small
        return _assemble(np.asarray(U, dtype=float), dirs, sig, self.kwave)

    def rate_ceiling(self, p_max):
        """Upper bound on the sum rate over every trajectory and layout:
        interference-free, matched filtering, d >= H, co-phased paths."""
        s = self.scenario
        amp = np.abs(self.g_small).sum(axis=-1) * np.sqrt(s.h0 / (s.altitude_H**2 * s.num_paths_L))
        return float(np.log2(1 + p_max * s.num_antennas_K * amp**2 / self.noise).sum())

    def dump_csv(self, Q, path):
        th, ph = self.angles(Q)
        sig = self.sigma(Q)
        N, M, L = sig.shape
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "user", "path", "theta", "phi", "re_sigma", "im_sigma"])
            for n in range(N):
                for m in range(M):
                    for i in range(L):
                        w.writerow([n, m, i, repr(th[n, m, i]), repr(ph[n, m, i]),
                                    repr(sig[n, m, i].real), repr(sig[n, m, i].imag)])


def _assemble(U, dirs, sig, kwave):
    # U (N,K,2), dirs (N,M,L,2), sig (N,M,L) -> (N,M,K)
    phase = np.exp(-1j * kwave * np.einsum("nkc,nmlc->nmkl", U, dirs))
    return np.einsum("nmkl,nml->nmk", phase, sig)
