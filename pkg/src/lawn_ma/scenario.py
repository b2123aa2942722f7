"""Mission configuration, unit conversion and admissibility checks."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np


def to_db(x):
    return 10.0 * np.log10(x)


def to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watts(x_dbm):
    return to_linear(x_dbm) * 1e-3


@dataclass(frozen=True)
class PsoConfig:
    S: int = 100
    t_max: int = 100
    L1: float = 1.4
    L2: float = 1.4
    chi_min: float = 0.4
    chi_max: float = 0.9
    psi: float = 20.0
    # draw R1/R2 per coordinate instead of once per particle
    per_coordinate: bool = False


@dataclass(frozen=True)
class LoopConfig:
    eps: float = 1e-3
    max_iter: int = 30


@dataclass(frozen=True)
class ScaConfig:
    eps: float = 1e-3
    l_max: int = 20
    # None -> v_max * tau / 2
    phi0: float | None = None
    shrink: float = 0.5
    phi_min: float = 1e-3


@dataclass(frozen=True)
class MmConfig:
    eps: float = 1e-4
    max_sweeps: int = 20
    per_antenna_refresh: bool = False


@dataclass(frozen=True)
class Scenario:
    """Immutable mission description. Lengths in meters, powers in watts
    except the two dB-valued radio constants."""

    mission_period_T: float = 40.0
    num_slots_N: int = 20
    num_users_M: int = 4
    # None -> seeded uniform placement over the mission area
    user_positions: tuple[tuple[float, float], ...] | None = None
    area_side: float = 800.0
    altitude_H: float = 50.0
    start_qI: tuple[float, float] = (0.0, 400.0)
    end_qF: tuple[float, float] = (800.0, 400.0)
    v_max: float = 30.0
    a_max: float = 10.0
    num_antennas_K: int = 4
    region_side_L: float = 0.4
    d_min: float = 0.05
    wavelength_lambda: float = 0.1
    num_paths_L: int = 4
    angular_spread_Delta: float = math.pi / 12
    rician_kappa: float = 15.0
    h0_dB: float = -60.0
    noise_power_dBm: float = -110.0
    p_max: float = 1.0
    rng_seed: int = 0
    strict_azimuth: bool = False
    # trajectory and placement candidates are scored with MMSE receivers
    # re-fitted to the candidate channel; False scores them with the frozen
    # beamformers
    adapt_receivers: bool = True
    pso: PsoConfig = field(default_factory=PsoConfig)
    ao: LoopConfig = field(default_factory=lambda: LoopConfig(eps=1e-3, max_iter=30))
    bca: LoopConfig = field(default_factory=lambda: LoopConfig(eps=1e-6, max_iter=200))
    sca: ScaConfig = field(default_factory=ScaConfig)
    mm: MmConfig = field(default_factory=MmConfig)

    @property
    def slot_duration_tau(self) -> float:
        return self.mission_period_T / self.num_slots_N

    @property
    def h0(self) -> float:
        return float(to_linear(self.h0_dB))

    @property
    def noise_power(self) -> float:
        return float(dbm_to_watts(self.noise_power_dBm))

    @property
    def users(self) -> np.ndarray:
        """(M, 2) user ground coordinates."""
        if self.user_positions is not None:
            return np.asarray(self.user_positions, dtype=float).reshape(-1, 2)
        rng = np.random.default_rng([0, self.rng_seed])
        return rng.uniform(0.0, self.area_side, size=(self.num_users_M, 2))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, rng_seed=int(seed))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return _build(cls, data, "scenario")

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


_NESTED = {"pso": PsoConfig, "ao": LoopConfig, "bca": LoopConfig, "sca": ScaConfig, "mm": MmConfig}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {unknown}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if cls is Scenario and key in _NESTED:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        elif key == "user_positions" and value is not None:
            value = tuple(tuple(float(c) for c in p) for p in value)
        elif key in ("start_qI", "end_qF"):
            value = tuple(float(c) for c in value)
        kwargs[key] = value
    return cls(**kwargs)


def default_scenario(seed: int = 0) -> Scenario:
    """Paper-scale defaults."""
    return Scenario(rng_seed=seed)


def desk_scenario(seed: int = 0) -> Scenario:
    """Reduced scale used by the CLI and the sweeps: N=10, S=40, t_max=40."""
    return replace(
        Scenario(rng_seed=seed),
        num_slots_N=10,
        pso=replace(PsoConfig(), S=40, t_max=40),
        ao=LoopConfig(eps=1e-3, max_iter=15),
    )


@dataclass
class ValidationReport:
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "scenario admissible"
        return "\n".join(f"- {f}" for f in self.failures)


def greedy_placement(K: int, side: float, d_min: float, grid: int = 81) -> np.ndarray | None:
    """Greedily pick K grid points of [0, side]^2 at pairwise distance >= d_min.

    Returns None when the greedy scan cannot fit K points.
    """
    ticks = np.linspace(0.0, side, grid)
    chosen: list[np.ndarray] = []
    for y in ticks:
        for x in ticks:
            p = np.array([x, y])
            if all(np.linalg.norm(p - c) >= d_min for c in chosen):
                chosen.append(p)
                if len(chosen) == K:
                    return np.array(chosen)
    return None


def validate(s: Scenario) -> ValidationReport:
    rep = ValidationReport()
    fail = rep.failures.append

    if s.num_users_M < 1:
        fail("M must be >= 1")
    if s.num_antennas_K < 1:
        fail("K must be >= 1")
    if s.num_paths_L < 1:
        fail("L (paths) must be >= 1")
    if s.num_slots_N < 2:
        fail("N must be >= 2 (both endpoints are pinned)")
    if s.mission_period_T <= 0:
        fail("mission period must be positive")
    for name in ("v_max", "a_max", "p_max", "altitude_H", "wavelength_lambda", "region_side_L"):
        if not getattr(s, name) > 0:
            fail(f"{name} must be positive")
    if s.angular_spread_Delta < 0 or s.rician_kappa < 0 or s.d_min < 0:
        fail("angular spread, rician factor and d_min must be nonnegative")
    if s.user_positions is not None and len(s.user_positions) != s.num_users_M:
        fail("user_positions length does not match M")
    if rep.failures:
        return rep

    if s.num_antennas_K >= 2 and s.d_min > s.region_side_L * math.sqrt(2):
        fail("placement infeasible: d_min exceeds the region diagonal")
    elif greedy_placement(s.num_antennas_K, s.region_side_L, s.d_min) is None:
        fail("placement infeasible: K antennas at spacing d_min do not fit the region")

    gap = math.dist(s.start_qI, s.end_qF)
    reach = s.v_max * s.slot_duration_tau * (s.num_slots_N - 1)
    if gap > reach:
        fail(f"endpoint unreachable: |qF - qI| = {gap:.1f} m > {reach:.1f} m")
    return rep
