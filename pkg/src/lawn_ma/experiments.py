"""Batch harness behind the command line: single missions, parameter sweeps
and rate CDFs, written as schema-stable CSV/JSON."""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from lawn_ma.baselines import SCHEMES, run_scheme
from lawn_ma.channel import ChannelModel
from lawn_ma.rate import rates_all
from lawn_ma.scenario import Scenario
from lawn_ma.trajectory import kinematics

SWEEP_PARAMS = ("p_max", "K", "L_paths", "region_size", "v_max")
CDF_POINTS = 200


def fmt(x) -> str:
    """Shortest round-tripping text for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def apply_param(scenario: Scenario, param: str, value: float) -> Scenario:
    """Scenario with one swept parameter changed. ``region_size`` is in
    wavelengths."""
    if param == "p_max":
        return replace(scenario, p_max=float(value))
    if param == "K":
        return replace(scenario, num_antennas_K=int(value))
    if param == "L_paths":
        return replace(scenario, num_paths_L=int(value))
    if param == "region_size":
        return replace(scenario, region_side_L=float(value) * scenario.wavelength_lambda)
    if param == "v_max":
        return replace(scenario, v_max=float(value))
    raise ValueError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


def resolve_threads(requested: int | None) -> int:
    env = os.environ.get("LAWN_MA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError(f"LAWN_MA_THREADS must be an integer, got {env!r}") from exc
    return max(1, int(requested or 1))


def _pmap(fn, jobs, threads):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


# -- single mission -------------------------------------------------------

def _mission_job(job):
    scenario, scheme = job
    model = ChannelModel(scenario)
    res = run_scheme(scheme, scenario, model)
    it = res.iterate
    H = model.channels(it.Q, it.U)
    rates = rates_all(it.W, it.P, H, model.noise)
    return scheme, res, rates


def run_mission(scenario: Scenario, out_dir, schemes=SCHEMES, extras=False, threads=1):
    out = Path(out_dir)
    results = _pmap(_mission_job, [(scenario, s) for s in schemes], threads)
    out.mkdir(parents=True, exist_ok=True)
    tau = scenario.slot_duration_tau

    conv, traj, rate_rows, state = [], [], [], {}
    bca_rows, swarm_rows = [], []
    for scheme, res, rates in results:
        conv += [(i, scheme, r) for i, r in enumerate(res.trace)]
        it = res.iterate
        speed, acc = kinematics(it.Q, tau)
        for n, (x, y) in enumerate(it.Q):
            traj.append((scheme, n, x, y, speed[n - 1] if n >= 1 else "",
                         acc[n - 2] if n >= 2 else ""))
        for n in range(rates.shape[0]):
            for m in range(rates.shape[1]):
                rate_rows.append((scheme, n, m, rates[n, m]))
        state[scheme] = {
            "sum_rate_bpshz": res.final_rate,
            "iterations": res.iterations,
            "converged": res.converged,
            "trajectory": it.Q.tolist(),
            "layouts": it.U.tolist(),
            "beamformers_re": it.W.real.tolist(),
            "beamformers_im": it.W.imag.tolist(),
            "powers": it.P.tolist(),
            "trace": res.trace,
        }
        bca_rows += [(scheme,) + r for r in res.bca_trace]
        swarm_rows += [(scheme,) + r for r in res.swarm_trace]

    write_csv(out / "convergence.csv", ["outer_iter", "scheme", "sum_rate_bpshz"], conv)
    write_csv(out / "trajectory.csv", ["scheme", "slot", "x", "y", "speed", "accel"], traj)
    write_csv(out / "rates.csv", ["scheme", "slot", "user", "rate_bpshz"], rate_rows)
    doc = {"scenario": scenario.to_dict(), "schemes": state}
    (out / "final_state.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    if extras:
        write_csv(out / "bca_trace.csv",
                  ["scheme", "outer_iter", "slot", "sweep", "surrogate", "true_sum_rate"], bca_rows)
        write_csv(out / "swarm_trace.csv",
                  ["scheme", "outer_iter", "slot", "t", "global_best_fitness"], swarm_rows)
        ChannelModel(scenario).dump_csv(results[0][1].iterate.Q, out / "channel.csv")
    write_plot_stub(out)
    return {scheme: res for scheme, res, _ in results}


# -- sweeps ---------------------------------------------------------------

def _sweep_job(job):
    scenario, scheme, param, value, seed = job
    res = run_scheme(scheme, scenario)
    return (param, value, scheme, seed, res.final_rate, res.iterations)


def sweep_jobs(base: Scenario, param, values, seeds, schemes):
    jobs = []
    for v in values:
        for seed in seeds:
            sc = apply_param(base, param, v).with_seed(seed)
            jobs += [(sc, scheme, param, v, seed) for scheme in schemes]
    return jobs


def summarize(rows):
    """Seed means keyed by (scheme, value), in first-seen order."""
    acc: dict = {}
    for param, value, scheme, seed, rate, _ in rows:
        acc.setdefault((scheme, param, value), []).append(rate)
    return [(scheme, param, value, float(np.mean(r)), len(r)) for (scheme, param, value), r in acc.items()]


def run_sweep(base: Scenario, param, values, seeds, out_dir, schemes=SCHEMES, threads=1):
    if not values:
        raise ValueError("empty value list")
    if not seeds:
        raise ValueError("empty seed list")
    jobs = sweep_jobs(base, param, values, seeds, schemes)
    rows = _pmap(_sweep_job, jobs, threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv",
              ["param", "value", "scheme", "seed", "sum_rate_bpshz", "iterations"], rows)
    summary = summarize(rows)
    write_csv(out / "sweep_summary.csv",
              ["scheme", "param", "value", "mean_sum_rate_bpshz", "seeds"], summary)
    write_plot_stub(out)
    return rows, summary


# -- rate CDF -------------------------------------------------------------

def _rates_job(job):
    scenario, scheme = job
    _, _, rates = _mission_job((scenario, scheme))
    return scheme, rates.ravel()


def cdf_table(pooled: dict, points=CDF_POINTS):
    top = max(float(np.max(r)) for r in pooled.values() if r.size)
    thresholds = np.linspace(0.0, top, points)
    rows = []
    for scheme, r in pooled.items():
        srt = np.sort(r)
        frac = np.searchsorted(srt, thresholds, side="right") / srt.size
        rows += [(scheme, t, f) for t, f in zip(thresholds, frac)]
    return rows


def run_cdf(base: Scenario, seeds, out_dir, schemes=SCHEMES, threads=1):
    if not seeds:
        raise ValueError("empty seed list")
    jobs = [(base.with_seed(s), scheme) for s in seeds for scheme in schemes]
    got = _pmap(_rates_job, jobs, threads)
    pooled = {scheme: np.concatenate([r for s, r in got if s == scheme]) for scheme in schemes}
    rows = cdf_table(pooled)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "cdf.csv", ["scheme", "threshold", "fraction_below"], rows)
    write_plot_stub(out)
    return rows


PLOT_STUB = '''"""Plot whatever CSV outputs sit next to this file (needs matplotlib)."""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(sys.argv[1] if len(sys.argv) > 1 else __file__).resolve()
here = here if here.is_dir() else here.parent

SPECS = {
    "convergence.csv": ("outer_iter", "sum_rate_bpshz"),
    "sweep_summary.csv": ("value", "mean_sum_rate_bpshz"),
    "cdf.csv": ("threshold", "fraction_below"),
}
for name, (xk, yk) in SPECS.items():
    path = here / name
    if not path.exists():
        continue
    series = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            series[row["scheme"]].append((float(row[xk]), float(row[yk])))
    fig, ax = plt.subplots()
    for scheme, pts in series.items():
        ax.plot(*zip(*sorted(pts)), marker=".", label=scheme)
    ax.set_xlabel(xk)
    ax.set_ylabel(yk)
    ax.legend()
    fig.savefig(path.with_suffix(".png"), dpi=120)
'''


def write_plot_stub(out: Path):
    (out / "plot.py").write_text(PLOT_STUB, encoding="utf-8")
