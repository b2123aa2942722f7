import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from lawn_ma.channel import ChannelModel
from lawn_ma.rate import DegenerateBeamformer, Iterate, rate, rates_all, sinr, sinr_all, sum_rate
from lawn_ma.scenario import desk_scenario


def _one(h, w=1.0, p=1.0, noise=1e-14):
    W = np.array([[[w]]], dtype=complex)
    H = np.array([[[h]]], dtype=complex)
    return Iterate(np.zeros((1, 2)), W, np.array([[p]]), np.zeros((1, 1, 2))), H, noise


def test_scalar_sinr():
    # alpha = 1e-6 / 100^2 with a unit single path
    it, H, noise = _one(math.sqrt(1e-10))
    assert sinr(0, 0, it, H, noise) == pytest.approx(1e4)
    assert rate(0, 0, it, H, noise) == pytest.approx(13.2879, abs=1e-4)


def test_zero_power():
    it, H, noise = _one(1e-5, p=0.0)
    assert sinr(0, 0, it, H, noise) == 0.0
    assert rate(0, 0, it, H, noise) == 0.0


def test_rate_values():
    assert rates_all(np.ones((1, 1)), np.array([1.0]), np.ones((1, 1)), 1.0)[0] == pytest.approx(1.0)


def test_degenerate_beamformer():
    it, H, noise = _one(1e-5, w=0.0)
    with pytest.raises(DegenerateBeamformer, match="degenerate beamformer"):
        sinr(0, 0, it, H, noise)


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3), st.floats(0, 2 * math.pi))
def test_scale_invariance(seed, mag, ang):
    rng = np.random.default_rng(seed)
    H = crandn(rng, 3, 4)
    W = crandn(rng, 3, 4)
    P = rng.uniform(0, 1, 3)
    c = mag * np.exp(1j * ang)
    a = sinr_all(W, P, H, 0.3)
    b = sinr_all(c * W, P, H, 0.3)
    assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_interference_by_hand(rng):
    H = crandn(rng, 2, 2)
    W = crandn(rng, 2, 2)
    P = np.array([0.7, 0.2])
    s = sinr_all(W, P, H, 0.1)
    for m in range(2):
        sig = P[m] * abs(np.vdot(W[m], H[m])) ** 2
        itf = sum(P[r] * abs(np.vdot(W[m], H[r])) ** 2 for r in range(2) if r != m)
        assert s[m] == pytest.approx(sig / (itf + 0.1 * np.vdot(W[m], W[m]).real))


def test_sum_rate_additive_and_per_slot():
    s = desk_scenario(3)
    cm = ChannelModel(s)
    N, M, K = s.num_slots_N, s.num_users_M, s.num_antennas_K
    rng = np.random.default_rng(0)
    Q = np.linspace(s.start_qI, s.end_qF, N)
    it = Iterate(Q, crandn(rng, N, M, K), rng.uniform(0, 1, (N, M)),
                 rng.uniform(0, s.region_side_L, (N, K, 2)))
    H = cm.channels(Q, it.U)
    slow = sum(rate(m, n, it, H, cm.noise) for n in range(N) for m in range(M))
    assert sum_rate(it, cm) == pytest.approx(slow, rel=1e-12)
    it0 = it.copy(P=np.zeros((N, M)))
    assert sum_rate(it0, cm) == 0.0


def test_identical_slots_add_up():
    H = np.tile(np.array([[[0.3 + 0.1j, -0.2j]]]), (5, 1, 1))
    W = np.tile(np.array([[[1.0, 0.5j]]]), (5, 1, 1))
    P = np.ones((5, 1))
    r = rates_all(W, P, H, 0.01)
    assert r.sum() == pytest.approx(5 * r[0, 0])
