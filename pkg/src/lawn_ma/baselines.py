"""Comparison schemes. All of them draw the same channel realization for a
given seed, so results are paired."""
from __future__ import annotations

import math

import numpy as np

from lawn_ma.ao import AoResult, ao_solve
from lawn_ma.channel import ChannelModel
from lawn_ma.scenario import Scenario
from lawn_ma.trajectory import straight_line

SCHEMES = ("proposed", "ao-mm", "fixed-traj", "fpa")


def fixed_trajectory(scenario: Scenario) -> np.ndarray:
    return straight_line(scenario.start_qI, scenario.end_qF, scenario.num_slots_N)


def fpa_layout(scenario: Scenario) -> np.ndarray:
    """ceil(sqrt K)-wide square grid at half-wavelength spacing (or d_min if
    larger), anchored at the region origin."""
    K = scenario.num_antennas_K
    g = math.ceil(math.sqrt(K))
    step = max(scenario.wavelength_lambda / 2, scenario.d_min)
    if (g - 1) * step > scenario.region_side_L:
        raise ValueError("fixed array does not fit the region")
    idx = np.arange(K)
    return np.stack([(idx % g) * step, (idx // g) * step], axis=1).astype(float)


def run_scheme(name: str, scenario: Scenario, model: ChannelModel | None = None) -> AoResult:
    model = model or ChannelModel(scenario)
    if name == "proposed":
        return ao_solve(scenario, "pso", "sca", model)
    if name == "ao-mm":
        return ao_solve(scenario, "mm", "sca", model)
    if name == "fixed-traj":
        return ao_solve(scenario, "pso", "fixed", model)
    if name == "fpa":
        return ao_solve(scenario, "fixed", "sca", model, layout=fpa_layout(scenario))
    raise ValueError(f"unknown scheme {name!r}")
