"""Command line entry point: ``lawn-ma {run,sweep,cdf,validate}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from lawn_ma import experiments as ex
from lawn_ma.baselines import SCHEMES
from lawn_ma.scenario import Scenario, default_scenario, desk_scenario, validate


class UsageError(Exception):
    pass


def _csv_list(text, cast, what):
    items = [t.strip() for t in (text or "").split(",") if t.strip()]
    try:
        return [cast(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"bad {what} list {text!r}") from exc


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_scenario(args) -> Scenario:
    base = desk_scenario() if args.scale == "desk" else default_scenario()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config not found: {path}")
        try:
            over = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(over, dict):
            raise UsageError("config must be a JSON object")
        try:
            base = Scenario.from_dict(_merge(base.to_dict(), over))
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    if getattr(args, "seed", None) is not None:
        base = base.with_seed(args.seed)
    rep = validate(base)
    if not rep:
        raise UsageError(f"invalid scenario:\n{rep}")
    return base


def _schemes(args):
    names = _csv_list(args.schemes, str, "scheme") if args.schemes else list(SCHEMES)
    bad = [n for n in names if n not in SCHEMES]
    if bad or not names:
        raise UsageError(f"unknown schemes {bad}; choose from {list(SCHEMES)}")
    return names


def _seeds(args):
    seeds = _csv_list(args.seeds, int, "seed")
    if not seeds:
        raise UsageError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lawn-ma", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, seeds=False):
        sp.add_argument("--config", help="JSON scenario overrides")
        sp.add_argument("--scale", choices=("desk", "paper"), default="desk",
                        help="base parameter set (default: desk)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--schemes", help=f"comma list from {','.join(SCHEMES)}")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker processes (LAWN_MA_THREADS overrides)")
        if seeds:
            sp.add_argument("--seeds", default="0,1,2,3,4", help="comma list of seeds")

    r = sub.add_parser("run", help="one mission, every scheme")
    common(r)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--extras", action="store_true",
                   help="also write inner-solver traces and the channel dump")

    s = sub.add_parser("sweep", help="final sum rate against one parameter")
    common(s, seeds=True)
    s.add_argument("--param", required=True, choices=ex.SWEEP_PARAMS)
    s.add_argument("--values", required=True,
                   help="comma list; region_size is in wavelengths")

    c = sub.add_parser("cdf", help="pooled per-user, per-slot rate CDFs")
    common(c, seeds=True)

    v = sub.add_parser("validate", help="check a scenario and exit")
    v.add_argument("--config")
    v.add_argument("--scale", choices=("desk", "paper"), default="desk")
    v.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args)
        if args.cmd == "validate":
            print(validate(scenario))
            return 0
        threads = ex.resolve_threads(args.threads)
        schemes = _schemes(args)
        if args.cmd == "run":
            res = ex.run_mission(scenario, args.out, schemes, args.extras, threads)
            for name, r in res.items():
                print(f"{name}: {r.final_rate:.4f} bps/Hz after {r.iterations} iterations")
        elif args.cmd == "sweep":
            values = _csv_list(args.values, float, "value")
            if not values:
                raise UsageError("empty value list")
            seeds = _seeds(args)
            for v in values:
                rep = validate(ex.apply_param(scenario, args.param, v))
                if not rep:
                    raise UsageError(f"{args.param}={v}: invalid scenario:\n{rep}")
            _, summary = ex.run_sweep(scenario, args.param, values, seeds, args.out, schemes, threads)
            for scheme, _, value, mean, _ in summary:
                print(f"{scheme} {args.param}={value}: {mean:.4f}")
        elif args.cmd == "cdf":
            ex.run_cdf(scenario, _seeds(args), args.out, schemes, threads)
            print(f"wrote {Path(args.out) / 'cdf.csv'}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
