"""Per-slot particle swarm search over antenna layouts at fixed trajectory,
powers and (unless re-fitted) receive beamformers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lawn_ma.rate import rates_all
from lawn_ma.wmmse import mmse_receivers


def inertia(t, t_max, chi_min=0.4, chi_max=0.9):
    return chi_max - (chi_max - chi_min) * t / t_max


def violating_pairs(layouts, d_min):
    """Number of unordered antenna pairs closer than d_min, per layout (..., K, 2)."""
    layouts = np.asarray(layouts, dtype=float)
    K = layouts.shape[-2]
    if K < 2:
        return np.zeros(layouts.shape[:-2], dtype=int)
    diff = layouts[..., :, None, :] - layouts[..., None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(K, 1)
    return np.sum(dist[..., iu[0], iu[1]] < d_min, axis=-1)


def step_velocity(vel, pos, local_best, global_best, chi, L1, L2, r1, r2):
    return chi * vel + L1 * r1 * (local_best - pos) + L2 * r2 * (global_best - pos)


def step_position(pos, vel, side):
    return np.clip(pos + vel, 0.0, side)


class SlotObjective:
    """Slot sum rate of candidate layouts, optionally with MMSE receivers
    re-fitted to each candidate."""

    def __init__(self, model, n, q, W, p, adapt=True):
        self.model, self.n, self.q = model, n, np.asarray(q, float)
        self.W, self.p, self.adapt = W, p, adapt

    def channels(self, layouts):
        return self.model.slot_channels(self.n, self.q, layouts)

    def receivers(self, H):
        if not self.adapt:
            return np.broadcast_to(self.W, H.shape)
        return mmse_receivers(np.broadcast_to(self.p, H.shape[:-1]), H, self.model.noise)

    def __call__(self, layouts):
        H = self.channels(layouts)
        W = self.receivers(H)
        P = np.broadcast_to(self.p, H.shape[:-1])
        R = rates_all(W, P, H, self.model.noise).sum(axis=-1)
        if self.adapt:
            # the re-fitted receivers never lose to the frozen ones; this
            # only absorbs round-off
            R = np.maximum(R, rates_all(np.broadcast_to(self.W, H.shape), P, H,
                                        self.model.noise).sum(axis=-1))
        return R

    def best_receivers(self, layout):
        H = self.channels(layout)
        if not self.adapt:
            return self.W.copy()
        W = self.receivers(H)
        mine = rates_all(W, self.p, H, self.model.noise).sum()
        frozen = rates_all(self.W, self.p, H, self.model.noise).sum()
        return W if mine >= frozen else self.W.copy()


@dataclass
class PsoSlotResult:
    layout: np.ndarray
    W: np.ndarray
    fitness: float
    incumbent_fitness: float
    fallback: bool
    trace: list = field(default_factory=list)  # (t, global best fitness)


def pso_solve_slot(objective: SlotObjective, incumbent, scenario, rng) -> PsoSlotResult:
    cfg = scenario.pso
    side, d_min = scenario.region_side_L, scenario.d_min
    K = scenario.num_antennas_K
    S = cfg.S

    def fitness(layouts):
        return objective(layouts) - cfg.psi * violating_pairs(layouts, d_min)

    incumbent = np.asarray(incumbent, dtype=float)
    pos = rng.uniform(0.0, side, size=(S, K, 2))
    pos[0] = incumbent
    vel = np.zeros_like(pos)
    fit = fitness(pos)
    inc_fit = float(fit[0])
    pbest, pbest_fit = pos.copy(), fit.copy()
    g = int(np.argmax(pbest_fit))
    gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])

    # best layout without violations seen so far, for the fallback
    feas = violating_pairs(pos, d_min) == 0
    raw = fit  # no penalty on feasible rows
    fb_idx = int(np.argmax(np.where(feas, raw, -np.inf)))
    best_feas, best_feas_fit = pos[fb_idx].copy(), float(raw[fb_idx])

    trace = [(0, gbest_fit)]
    vclamp = side / 2
    rshape = (S, K, 2) if cfg.per_coordinate else (S, 1, 1)
    for t in range(1, cfg.t_max + 1):
        chi = inertia(t, cfg.t_max, cfg.chi_min, cfg.chi_max)
        r1 = rng.random(rshape)
        r2 = rng.random(rshape)
        vel = np.clip(step_velocity(vel, pos, pbest, gbest, chi, cfg.L1, cfg.L2, r1, r2),
                      -vclamp, vclamp)
        pos = step_position(pos, vel, side)
        viol = violating_pairs(pos, d_min)
        fit = objective(pos) - cfg.psi * viol
        better = fit > pbest_fit
        pbest[better] = pos[better]
        pbest_fit[better] = fit[better]
        g = int(np.argmax(pbest_fit))
        if pbest_fit[g] > gbest_fit:
            gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])
        feas_fit = np.where(viol == 0, fit, -np.inf)
        i = int(np.argmax(feas_fit))
        if feas_fit[i] > best_feas_fit:
            best_feas, best_feas_fit = pos[i].copy(), float(feas_fit[i])
        trace.append((t, gbest_fit))

    fallback = bool(violating_pairs(gbest, d_min) > 0)
    layout, value = (best_feas, best_feas_fit) if fallback else (gbest, gbest_fit)
    if not np.isfinite(value):
        layout, value = incumbent.copy(), inc_fit
    return PsoSlotResult(layout, objective.best_receivers(layout), value, inc_fit, fallback, trace)


@dataclass
class PlacementResult:
    U: np.ndarray
    W: np.ndarray
    # rows (slot, t, global best fitness)
    trace: list = field(default_factory=list)
    fallbacks: int = 0


def pso_placement(iterate, model, scenario, key=0) -> PlacementResult:
    """Run the swarm independently on every slot. ``key`` (e.g. the outer
    iteration) separates the random streams of successive calls."""
    U = iterate.U.copy()
    W = iterate.W.copy()
    out = PlacementResult(U, W)
    for n in range(U.shape[0]):
        rng = np.random.default_rng([3, scenario.rng_seed, int(key), n])
        obj = SlotObjective(model, n, iterate.Q[n], iterate.W[n], iterate.P[n],
                            scenario.adapt_receivers)
        res = pso_solve_slot(obj, iterate.U[n], scenario, rng)
        U[n], W[n] = res.layout, res.W
        out.fallbacks += res.fallback
        out.trace.extend((n, t, f) for t, f in res.trace)
    return out
