"""Command-line entry point.

``mflab <command> --config cfg.yaml [overrides]`` runs one experiment,
writes its CSV output, prints one line per check, and exits 0 when all
checks pass, 1 when any check fails, and 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

import yaml

from .core import ConfigError, DomainError
from .harness import COMMANDS, HarnessConfig


def _parse_n_grid(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad width grid {text!r}: {exc}") from exc


def build_config(args: argparse.Namespace) -> HarnessConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {args.config} must hold a mapping")
        known = {f.name for f in dataclasses.fields(HarnessConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for name in ("beta", "gamma", "alpha", "horizon", "seeds", "paths",
                 "steps", "m_lambda", "m_points", "base_seed", "out_dir",
                 "jobs", "ode_horizon"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "n_grid", None) is not None:
        values["n_grid"] = _parse_n_grid(args.n_grid)
    if "n_grid" in values:
        values["n_grid"] = tuple(values["n_grid"])
    try:
        return HarnessConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mflab",
        description="Numerical studies of wide recurrent networks trained "
                    "online on dependent data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML file with HarnessConfig fields")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--n-grid", dest="n_grid",
                       help="comma-separated widths, e.g. 100,400,1600")
        p.add_argument("--seeds", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--ode-horizon", dest="ode_horizon", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--m-lambda", dest="m_lambda", type=int)
        p.add_argument("--m-points", dest="m_points", type=int)
        p.add_argument("--base-seed", dest="base_seed", type=int)
        p.add_argument("--jobs", type=int)

    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        result = COMMANDS[args.command](cfg)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    for name, ok in result.checks.items():
        print(f"{result.name}: {name}: {'pass' if ok else 'FAIL'}")
    for key, val in result.details.items():
        print(f"  {key} = {val}")
    for path in result.files:
        print(f"  wrote {path}")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
