import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lawn_ma.channel import (ChannelModel, PathAngles, PathResponse, channel_vector,
                             channel_vector_matrix_form, distance, nominal_angles,
                             path_response, phase_difference, receive_frv, sample_path_angles,
                             small_scale)
from lawn_ma.rate import sinr_all
from lawn_ma.scenario import desk_scenario


@pytest.mark.parametrize("diff,expected", [((0, 0), 50.0), ((30, 40), 70.7107), ((100, 0), 111.8034)])
def test_distance(diff, expected):
    assert distance(np.array(diff, float), np.zeros(2), 50.0) == pytest.approx(expected, abs=1e-4)


def test_angles_overhead():
    th, ph = nominal_angles(np.zeros(2), np.zeros(2), 50.0)
    assert th == pytest.approx(math.pi / 2) and ph == 0.0


def test_angles_345():
    th, ph = nominal_angles(np.array([30.0, 40.0]), np.zeros(2), 50.0)
    assert th == pytest.approx(math.pi / 4)
    assert ph == pytest.approx(math.acos(0.8))
    assert ph == pytest.approx(0.6435, abs=1e-4)


def test_angles_along_y():
    th, ph = nominal_angles(np.array([0.0, 100.0]), np.zeros(2), 50.0)
    assert th == pytest.approx(0.46365, abs=1e-5)
    assert ph == pytest.approx(0.0)


def test_signed_azimuth_recovers_direction():
    # the direction vector should point along (q - s) horizontally
    for diff in [(30.0, 40.0), (-30.0, 40.0), (-30.0, -40.0), (30.0, -40.0)]:
        th, ph = nominal_angles(np.array(diff), np.zeros(2), 50.0)
        # azimuth from the y axis: (sin, cos) recovers (dx, dy)
        assert math.sin(ph) * 50 == pytest.approx(diff[0])
        assert math.cos(ph) * 50 == pytest.approx(diff[1])
    _, ph = nominal_angles(np.array([-30.0, 40.0]), np.zeros(2), 50.0, strict=True)
    assert ph == pytest.approx(math.acos(0.8))


def test_offsets():
    rng = np.random.default_rng(7)
    a = sample_path_angles(rng, 0.3, 0.2, 0.0, 4)
    assert np.all(a.theta == 0.3) and np.all(a.phi == 0.2)
    a = sample_path_angles(np.random.default_rng(7), 0.3, 0.2, math.pi / 12, 4)
    b = sample_path_angles(np.random.default_rng(7), 0.3, 0.2, math.pi / 12, 4)
    assert np.array_equal(a.theta, b.theta)
    assert np.all(np.abs(a.theta - 0.3) <= math.pi / 24)
    assert np.all(np.abs(a.phi - 0.2) <= math.pi / 24)


def test_phase_difference():
    lam = 0.1
    assert phase_difference(np.zeros(2), 0.4, 0.7) == 0.0
    assert phase_difference(np.array([lam / 2, 0]), math.pi / 2, 0.0) == pytest.approx(lam / 2)
    val = phase_difference(np.array([0.1, 0.2]), math.pi / 4, math.pi / 3)
    assert val == pytest.approx(0.157829, abs=1e-6)


def test_frv():
    ang = PathAngles(np.array([0.3, 1.0, 1.2]), np.array([0.1, -2.0, 0.5]))
    assert np.allclose(receive_frv(np.zeros(2), ang, 0.1), 1.0)
    one = PathAngles(np.array([math.pi / 2]), np.array([0.0]))
    assert np.allclose(receive_frv(np.array([0.05, 0.0]), one, 0.1), [-1.0])


@given(st.floats(0, 0.4), st.floats(0, 0.4))
def test_frv_unit_modulus(x, y):
    ang = PathAngles(np.array([0.3, 1.0, 1.2]), np.array([0.1, -2.0, 0.5]))
    assert np.allclose(np.abs(receive_frv(np.array([x, y]), ang, 0.1)), 1.0, atol=1e-12)


def test_pure_los_limit():
    r = path_response(np.random.default_rng(0), 2.5e-9, np.inf, 1)
    assert r.sigma[0] == pytest.approx(math.sqrt(2.5e-9))


def test_path_power_normalization():
    rng = np.random.default_rng(11)
    g = small_scale(rng, 15.0, 4, size=100_000)
    assert np.mean(np.sum(np.abs(g) ** 2, axis=-1)) == pytest.approx(4.0, rel=0.02)
    g1 = small_scale(rng, 15.0, 1, size=100_000)
    assert np.mean(np.abs(g1) ** 2) == pytest.approx(1.0, rel=0.02)


def test_path_response_deterministic():
    a = path_response(np.random.default_rng(7), 1e-9, 15.0, 4)
    b = path_response(np.random.default_rng(7), 1e-9, 15.0, 4)
    assert np.array_equal(a.sigma, b.sigma)


def test_single_path_reference_point():
    ang = PathAngles(np.array([0.7]), np.array([0.2]))
    resp = PathResponse(np.array([0.3 - 0.1j]), 1.0, np.ones(1))
    assert np.allclose(channel_vector(np.zeros((1, 2)), ang, resp, 0.1), [0.3 - 0.1j])


def test_matrix_form_agrees(rng):
    for _ in range(20):
        L, K = rng.integers(1, 6), rng.integers(1, 5)
        ang = PathAngles(rng.uniform(0, math.pi / 2, L), rng.uniform(-math.pi, math.pi, L))
        resp = PathResponse(rng.standard_normal(L) + 1j * rng.standard_normal(L), 1.0, np.ones(L))
        U = rng.uniform(0, 0.4, (K, 2))
        a = channel_vector(U, ang, resp, 0.1)
        b = channel_vector_matrix_form(U, ang, resp, 0.1)
        assert np.max(np.abs(a - b)) < 1e-12


def test_translation_common_phase_single_path(rng):
    ang = PathAngles(np.array([0.8]), np.array([0.4]))
    resp = PathResponse(np.array([1.0 + 0.5j]), 1.0, np.ones(1))
    U = rng.uniform(0, 0.3, (3, 2))
    h1 = channel_vector(U, ang, resp, 0.1)
    h2 = channel_vector(U + np.array([0.02, 0.05]), ang, resp, 0.1)
    ratio = h2 / h1
    assert np.allclose(ratio, ratio[0]) and abs(ratio[0]) == pytest.approx(1.0)


def test_model_consistency():
    s = desk_scenario(2)
    cm = ChannelModel(s)
    Q = np.linspace(s.start_qI, s.end_qF, s.num_slots_N)
    U = np.random.default_rng(0).uniform(0, s.region_side_L, (s.num_slots_N, s.num_antennas_K, 2))
    H = cm.channels(Q, U)
    assert H.shape == (s.num_slots_N, s.num_users_M, s.num_antennas_K)
    for n in (0, 4, 9):
        assert np.allclose(cm.slot_channels(n, Q[n], U[n]), H[n], atol=0, rtol=1e-12)
        batch = cm.slot_channels(n, Q[n], np.stack([U[n], U[n]]))
        assert np.allclose(batch[1], H[n])
    # frozen channels scaled back by distance reproduce the exact ones
    Hx = cm.frozen_channels(Q, U)
    d = cm.distances(Q)
    assert np.allclose(Hx / d[..., None], H, rtol=1e-12, atol=0)


def test_model_deterministic():
    s = desk_scenario(9)
    a, b = ChannelModel(s), ChannelModel(s)
    assert np.array_equal(a.g_small, b.g_small) and np.array_equal(a.d_phi, b.d_phi)


def test_frozen_single_path_magnitude():
    s = replace(desk_scenario(), num_paths_L=1, rician_kappa=math.inf, num_antennas_K=1)
    cm = ChannelModel(s)
    Q = np.linspace(s.start_qI, s.end_qF, s.num_slots_N)
    U = np.zeros((s.num_slots_N, 1, 2))
    assert np.allclose(np.abs(cm.frozen_channels(Q, U)), math.sqrt(s.h0))


def test_sinr_translation_invariant_single_path():
    s = replace(desk_scenario(), num_paths_L=1, num_users_M=1, user_positions=((300.0, 500.0),))
    cm = ChannelModel(s)
    Q = np.linspace(s.start_qI, s.end_qF, s.num_slots_N)
    U = np.random.default_rng(3).uniform(0, 0.2, (s.num_slots_N, s.num_antennas_K, 2))
    P = np.ones((s.num_slots_N, 1))
    W = np.random.default_rng(4).standard_normal((s.num_slots_N, 1, s.num_antennas_K)) + 0j
    g1 = sinr_all(W, P, cm.channels(Q, U), cm.noise)
    g2 = sinr_all(W, P, cm.channels(Q, U + 0.1), cm.noise)
    assert np.allclose(g1, g2, rtol=1e-10)


def test_rate_ceiling_bounds_matched_filters():
    s = desk_scenario(1)
    cm = ChannelModel(s)
    Q = np.linspace(s.start_qI, s.end_qF, s.num_slots_N)
    U = np.zeros((s.num_slots_N, s.num_antennas_K, 2))
    H = cm.channels(Q, U)
    W = H / np.linalg.norm(H, axis=-1, keepdims=True)
    from lawn_ma.rate import rates_all
    assert rates_all(W, np.ones(H.shape[:2]), H, cm.noise).sum() < cm.rate_ceiling(1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 6))
def test_angles_within_support(seed):
    s = desk_scenario(seed)
    cm = ChannelModel(s)
    Q = np.linspace(s.start_qI, s.end_qF, s.num_slots_N)
    th, ph = cm.angles(Q)
    assert th.shape == (s.num_slots_N, s.num_users_M, s.num_paths_L)
    half = s.angular_spread_Delta / 2
    # far users sit at low elevation, so an offset may tip a path below 0
    assert np.all((th >= -half) & (th <= math.pi / 2 + half))


def test_channel_dump(tmp_path):
    s = desk_scenario()
    cm = ChannelModel(s)
    Q = np.linspace(s.start_qI, s.end_qF, s.num_slots_N)
    cm.dump_csv(Q, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_bytes().split(b"\n")
    assert lines[0] == b"slot,user,path,theta,phi,re_sigma,im_sigma"
    assert len(lines) - 2 == s.num_slots_N * s.num_users_M * s.num_paths_L
    assert b"\r" not in (tmp_path / "c.csv").read_bytes()
