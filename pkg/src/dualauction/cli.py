"""Command-line entry point: ``dualauction {run,sweep,preset,verify}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import properties
from .config import make_config
from .errors import ConfigError
from .runner import (PRESETS, ScenarioConfig, expand_sweep, load_config_file, preset, run_batch,
                     scenario_from_dict)

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_PROPERTY = 0, 1, 2, 3


def _parse_set(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario or parameter file")
    common.add_argument("--seed", type=int, help="seed (first seed for multi-seed scenarios)")
    common.add_argument("--out", default="out", help="output root directory (default: out)")
    common.add_argument("--parallel", type=int, default=1, help="worker processes (default: 1)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter; repeatable")

    p = argparse.ArgumentParser(prog="dualauction",
                                description="Dual auction wireless blockchain simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one simulation run")
    sub.add_parser("sweep", parents=[common], help="cross product of axes from --config")
    pp = sub.add_parser("preset", parents=[common], help="a figure preset or the property suites")
    pp.add_argument("name", choices=PRESETS)
    sub.add_parser("verify", help="run the property suites")
    return p


def _scenario(args, base: ScenarioConfig) -> ScenarioConfig:
    """Defaults < preset < config file < flags."""
    sc = base
    if args.config:
        sc = scenario_from_dict(load_config_file(args.config), sc)
    overrides = _parse_set(args.set)
    if overrides:
        sc = scenario_from_dict(overrides, sc)
    if args.seed is not None:
        sc = sc.with_seed_base(args.seed)
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    return sc


def _verify() -> int:
    bad = False
    for r in properties.run_all():
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name}: {r.checks} checks in {r.seconds:.2f}s")
        for v in r.violations:
            print(f"    {v}")
        bad |= not r.ok
    return EXIT_PROPERTY if bad else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify" or (args.command == "preset" and args.name == "properties"):
        return _verify()
    try:
        if args.command == "run":
            sc = _scenario(args, ScenarioConfig("run"))
            if sc.axes:
                raise ConfigError("run takes no sweep axes; use sweep")
            sc.seeds = sc.seeds[:1]
        elif args.command == "sweep":
            if not args.config:
                raise ConfigError("sweep requires --config")
            sc = _scenario(args, ScenarioConfig("sweep"))
        else:
            sc = _scenario(args, preset(args.name))
        specs = expand_sweep(sc)
        if args.command == "run" and sc.kind == "sim":
            make_config(specs[0].values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    batch = run_batch(sc, args.parallel, Path(args.out), specs)
    root = Path(args.out) / sc.name
    done = len(batch.records) - len(batch.failures)
    print(f"{sc.name}: {done}/{len(batch.records)} runs succeeded -> {root}")
    for rec in batch.failures:
        print(f"  FAILED {rec.spec.run_id}: {rec.error.splitlines()[0]}", file=sys.stderr)
    if batch.failures:
        return EXIT_RUN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
