"""SINR and achievable-rate evaluation; every optimizer is scored here."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class DegenerateBeamformer(ValueError):
    pass


@dataclass
class Iterate:
    Q: np.ndarray  # (N, 2) waypoints
    W: np.ndarray  # (N, M, K) receive beamformers, W[n, m] = w_{m,n}
    P: np.ndarray  # (N, M) transmit powers, watts
    U: np.ndarray  # (N, K, 2) antenna layouts

    def copy(self, **changes) -> "Iterate":
        base = Iterate(self.Q.copy(), self.W.copy(), self.P.copy(), self.U.copy())
        return replace(base, **changes) if changes else base


def gains(W, H):
    """|w_m^H h_r|^2 indexed [..., m, r]."""
    return np.abs(np.einsum("...mk,...rk->...mr", W.conj(), H)) ** 2


def sinr_all(W, P, H, noise):
    """SINR for every (slot, user); works on any leading batch axes.

    W, H: (..., M, K); P: (..., M).
    """
    G = gains(W, H)
    rx = G * P[..., None, :]
    signal = np.diagonal(rx, axis1=-2, axis2=-1)
    wn = np.sum(np.abs(W) ** 2, axis=-1)
    interf = rx.sum(axis=-1) - signal
    return signal / (interf + wn * noise)


def rates_all(W, P, H, noise):
    return np.log1p(sinr_all(W, P, H, noise)) / np.log(2)


def sinr(m, n, iterate: Iterate, H, noise) -> float:
    w = iterate.W[n, m]
    if not np.any(w):
        raise DegenerateBeamformer("degenerate beamformer")
    return float(sinr_all(iterate.W[n], iterate.P[n], H[n], noise)[m])


def rate(m, n, iterate: Iterate, H, noise) -> float:
    return float(np.log1p(sinr(m, n, iterate, H, noise)) / np.log(2))


def sum_rate(iterate: Iterate, model, H=None) -> float:
    """Mission sum rate in bps/Hz. ``H`` may be passed to skip recomputing
    channels from the model."""
    if H is None:
        H = model.channels(iterate.Q, iterate.U)
    return float(rates_all(iterate.W, iterate.P, H, model.noise).sum())
