"""Outer alternating optimization: trajectory, then beamformers and powers,
then antenna layouts, until the mission sum rate settles."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from lawn_ma.channel import ChannelModel
from lawn_ma.placement_mm import mm_placement
from lawn_ma.placement_pso import pso_placement, violating_pairs
from lawn_ma.rate import Iterate, sum_rate
from lawn_ma.scenario import Scenario, greedy_placement, validate
from lawn_ma.trajectory import kinematic_violations, sca_solve, straight_line
from lawn_ma.wmmse import bca_solve, matched_filters

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-6
SPACING_TOL = 1e-12


class MonotonicityError(RuntimeError):
    pass


def initial_layout(scenario: Scenario) -> np.ndarray:
    """K antennas on the centres of a ceil(sqrt K) square grid of cells."""
    K, side = scenario.num_antennas_K, scenario.region_side_L
    g = math.ceil(math.sqrt(K))
    step = side / g
    if K > 1 and step < scenario.d_min:
        pts = greedy_placement(K, side, scenario.d_min)
        if pts is None:
            raise ValueError("placement infeasible")
        return pts
    idx = np.arange(K)
    return np.stack([(idx % g + 0.5) * step, (idx // g + 0.5) * step], axis=1)


def initial_iterate(scenario: Scenario, model: ChannelModel, layout=None) -> Iterate:
    N, M = scenario.num_slots_N, scenario.num_users_M
    Q = straight_line(scenario.start_qI, scenario.end_qF, N)
    base = initial_layout(scenario) if layout is None else np.asarray(layout, float)
    U = np.tile(base, (N, 1, 1))
    W = matched_filters(model.channels(Q, U))
    P = np.full((N, M), float(scenario.p_max))
    return Iterate(Q, W, P, U)


def convergence_check(trace, eps) -> bool:
    return len(trace) >= 2 and abs(trace[-1] - trace[-2]) < eps


def monotonicity_audit(trace, slack=MONOTONE_SLACK):
    """Indices i where trace[i] < trace[i-1] - slack."""
    return [i for i in range(1, len(trace)) if trace[i] < trace[i - 1] - slack]


def feasibility_audit(it: Iterate, scenario: Scenario, tol=1e-9):
    out = [f"trajectory: {v}" for v in kinematic_violations(it.Q, scenario, tol)]
    if np.any(np.linalg.norm(it.W, axis=-1) > 1 + tol):
        out.append("beamformer norm above 1")
    if np.any(it.P < -tol) or np.any(it.P > scenario.p_max + tol):
        out.append("power outside [0, p_max]")
    if np.any(it.U < -tol) or np.any(it.U > scenario.region_side_L + tol):
        out.append("antenna outside the region")
    if np.any(violating_pairs(it.U, scenario.d_min - SPACING_TOL) > 0):
        out.append("antenna spacing below d_min")
    return out


@dataclass
class AoResult:
    iterate: Iterate
    trace: list  # mission sum rate; entry 0 is the initial point
    iterations: int
    converged: bool
    bca_trace: list = field(default_factory=list)  # (outer, slot, sweep, surrogate, true)
    swarm_trace: list = field(default_factory=list)  # (outer, slot, t, best fitness)

    @property
    def final_rate(self) -> float:
        return self.trace[-1]


PLACEMENT = {"pso": pso_placement, "mm": mm_placement}


def ao_solve(scenario: Scenario, placement="pso", trajectory="sca", model=None, layout=None,
             wp_first=False) -> AoResult:
    """Alternate the three blocks.

    ``placement`` is one of pso, mm, fixed and ``trajectory`` one of sca,
    fixed. ``layout`` overrides the initial (K, 2) layout, which a fixed
    placement then keeps for the whole mission. ``wp_first`` runs the
    beamformer/power block before the trajectory block.
    """
    rep = validate(scenario)
    if not rep:
        raise ValueError(f"invalid scenario:\n{rep}")
    if placement not in ("pso", "mm", "fixed") or trajectory not in ("sca", "fixed"):
        raise ValueError(f"unknown engines {placement!r}/{trajectory!r}")
    model = model or ChannelModel(scenario)
    it = initial_iterate(scenario, model, layout)
    ceiling = model.rate_ceiling(scenario.p_max)
    cur = sum_rate(it, model)
    trace = [cur]
    res = AoResult(it, trace, 0, False)
    cfg = scenario.ao

    def wp_block(i):
        H = model.channels(it.Q, it.U)
        b = bca_solve(it.W, it.P, H, model.noise, scenario.p_max,
                      scenario.bca.eps, scenario.bca.max_iter)
        it.W, it.P = b.W, b.P
        res.bca_trace.extend((i,) + row for row in b.trace)

    def traj_block(i):
        if trajectory == "sca":
            s = sca_solve(it, model, scenario)
            it.Q, it.W = s.Q, s.W

    for i in range(1, cfg.max_iter + 1):
        if wp_first:
            wp_block(i)
            traj_block(i)
        else:
            traj_block(i)
            wp_block(i)
        if placement != "fixed":
            pr = PLACEMENT[placement](it, model, scenario, key=i)
            it.U, it.W = pr.U, pr.W
            res.swarm_trace.extend((i,) + row for row in pr.trace)
        new = sum_rate(it, model)
        bad = feasibility_audit(it, scenario)
        if bad:
            raise AssertionError(f"iteration {i}: infeasible iterate: {bad}")
        if new > ceiling * (1 + 1e-9):
            raise AssertionError(f"iteration {i}: sum rate {new} above ceiling {ceiling}")
        if new < cur - MONOTONE_SLACK:
            dump = json.dumps({"iteration": i, "trace": trace + [new]})
            raise MonotonicityError(f"sum rate decreased: {dump}")
        trace.append(new)
        res.iterations = i
        if abs(new - cur) < cfg.eps:
            res.converged = True
            cur = new
            break
        cur = new
    return res
