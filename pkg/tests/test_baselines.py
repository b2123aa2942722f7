from dataclasses import replace

import numpy as np
import pytest

from lawn_ma.baselines import SCHEMES, fixed_trajectory, fpa_layout, run_scheme
from lawn_ma.channel import ChannelModel
from lawn_ma.scenario import LoopConfig, PsoConfig, desk_scenario
from lawn_ma.trajectory import kinematics


def tiny(seed=0, **kw):
    base = dict(num_slots_N=6, pso=PsoConfig(S=10, t_max=10), ao=LoopConfig(eps=1e-3, max_iter=2))
    base.update(kw)
    return replace(desk_scenario(seed), **base)


def test_fixed_trajectory_line():
    s = desk_scenario()
    Q = fixed_trajectory(s)
    assert np.array_equal(Q[0], s.start_qI) and np.array_equal(Q[-1], s.end_qF)
    v, a = kinematics(Q, s.slot_duration_tau)
    assert np.allclose(v, v[0]) and np.allclose(a, 0)


def test_fpa_four_antennas():
    s = replace(desk_scenario(), num_antennas_K=4)
    U = fpa_layout(s)
    D = np.linalg.norm(U[:, None] - U[None], axis=-1)
    nn = np.sort(D + np.eye(4) * 9, axis=1)[:, 0]
    assert np.allclose(nn, 0.05)
    r = run_scheme("fpa", tiny(num_antennas_K=4))
    assert np.all(r.iterate.U == r.iterate.U[0])
    assert np.allclose(r.iterate.U[0], U)


def test_fpa_ignores_region_size():
    a = run_scheme("fpa", tiny(region_side_L=0.2))
    b = run_scheme("fpa", tiny(region_side_L=0.5))
    assert a.trace == b.trace


def test_fixed_traj_keeps_line():
    s = tiny()
    r = run_scheme("fixed-traj", s)
    assert np.array_equal(r.iterate.Q, fixed_trajectory(s))


def test_schemes_share_channel():
    s = tiny()
    rates = {n: run_scheme(n, s, ChannelModel(s)).trace[0] for n in ("proposed", "ao-mm", "fixed-traj")}
    # same straight line, same initial layout, same draws
    assert len(set(rates.values())) == 1


def test_unknown_scheme():
    with pytest.raises(ValueError):
        run_scheme("nope", tiny())
    assert SCHEMES == ("proposed", "ao-mm", "fixed-traj", "fpa")
