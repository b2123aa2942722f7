import math
from dataclasses import replace

import numpy as np
import pytest

from lawn_ma.scenario import (Scenario, dbm_to_watts, default_scenario, desk_scenario,
                              to_db, to_linear, validate)


def test_defaults():
    s = default_scenario()
    assert s.slot_duration_tau == 2.0
    assert s.num_slots_N == 20
    assert s.region_side_L == pytest.approx(0.4)
    assert s.region_side_L == pytest.approx(4 * s.wavelength_lambda)
    assert s.d_min == pytest.approx(0.5 * s.wavelength_lambda)
    assert s.pso.psi == 20 and s.pso.chi_max == 0.9 and s.pso.chi_min == 0.4


def test_units():
    assert dbm_to_watts(-110) == pytest.approx(1e-14)
    assert to_linear(-60) == pytest.approx(1e-6)
    assert to_db(1e-6) == pytest.approx(-60)
    s = default_scenario()
    assert s.noise_power == pytest.approx(1e-14)
    assert s.h0 == pytest.approx(1e-6)


def test_default_and_desk_validate():
    assert validate(default_scenario()).ok
    assert validate(desk_scenario()).ok
    assert str(validate(default_scenario())) == "scenario admissible"


def test_unreachable_endpoint():
    s = replace(default_scenario(), start_qI=(0.0, 0.0), end_qF=(2000.0, 2000.0))
    rep = validate(s)
    assert not rep
    assert any("endpoint unreachable" in f for f in rep.failures)


def test_placement_infeasible():
    s = default_scenario()
    rep = validate(replace(s, d_min=10 * s.region_side_L))
    assert any("placement infeasible" in f for f in rep.failures)


def test_single_antenna_ignores_spacing():
    s = default_scenario()
    assert validate(replace(s, num_antennas_K=1, d_min=10 * s.region_side_L)).ok


def test_users_seeded_and_inside_area():
    a, b = default_scenario(3).users, default_scenario(3).users
    assert np.array_equal(a, b)
    assert not np.array_equal(a, default_scenario(4).users)
    assert a.shape == (4, 2)
    assert np.all((a >= 0) & (a <= 800))


def test_json_round_trip(tmp_path):
    s = replace(desk_scenario(5), user_positions=((1.0, 2.0), (3.0, 4.0), (5.0, 6.0), (7.0, 8.0)))
    p = tmp_path / "s.json"
    s.to_json(p)
    assert Scenario.from_json(p) == s


def test_unknown_key_rejected():
    with pytest.raises(ValueError, match="unknown keys"):
        Scenario.from_dict({"bogus": 1})
    with pytest.raises(ValueError, match="unknown keys"):
        Scenario.from_dict({"pso": {"bogus": 1}})


def test_bad_counts():
    rep = validate(replace(default_scenario(), num_users_M=0))
    assert not rep
    rep = validate(replace(default_scenario(), v_max=-1.0))
    assert any("v_max" in f for f in rep.failures)


def test_reach_uses_slot_count():
    # N - 1 transitions of tau each are available between the endpoints
    s = desk_scenario()
    reach = s.v_max * s.slot_duration_tau * (s.num_slots_N - 1)
    gap = math.dist(s.start_qI, s.end_qF)
    assert gap <= reach
    tight = replace(s, v_max=gap / (s.slot_duration_tau * (s.num_slots_N - 1)) * 0.99)
    assert not validate(tight)
