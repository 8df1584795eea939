"""Command line: ``eluder-rl <subcommand> [--config FILE] [--seed N] [--out DIR] [--jobs N] ...``.

Precedence: command-line flags, then ``ELUDER_RL_*`` environment variables,
then the config file.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError
from .harness import EXIT_CONFIG, SUBCOMMANDS, ExperimentConfig, apply_env_overrides, run_experiment
from . import io

# subcommand-specific flags: (flag, config key, type)
_FLAGS = {
    "run-det": [("--env", "env", str), ("--space", "space", str), ("--episodes", "episodes", str)],
    "run-stoch": [("--env", "env", str), ("--space", "space", str), ("--gap", "gap", str),
                  ("--epsilon", "epsilon", float), ("--delta", "delta", float)],
    "adversary": [("--class", "class", str), ("--tree", "tree", str), ("--dimension", "dimension", int),
                  ("--horizon", "horizon", int), ("--episodes", "episodes", int), ("--agent", "agent", str)],
    "dims": [("--space", "space", str)],
    "oracle-check": [("--space", "space", str), ("--queries", "queries", int),
                     ("--constraint-sets", "constraint_sets", int)],
    "audit": [("--runs", "runs", str)],
}
_PARAM_KEYS = {"gap", "epsilon", "delta"}
_HELP = {
    "run-det": "policy elimination on a deterministic MDP, with exact audits",
    "run-stoch": "simulator-driven policy elimination on a stochastic MDP",
    "adversary": "play an agent against the adaptive binary-tree adversary",
    "dims": "eluder / Littlestone dimensions, Fourier bounds, random-feature runs",
    "oracle-check": "compare the elimination oracle with brute-force enumeration",
    "audit": "re-check saved run artifacts",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eluder-rl", description="Policy elimination experiments for finite-horizon MDPs.",
        epilog="Exit status: 0 audits pass, 1 audit failure, 2 config error, 3 contract breach.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
        p.add_argument("--out", help="artifact directory")
        p.add_argument("--jobs", type=int, help="worker processes")
        for flag, key, typ in _FLAGS[name]:
            p.add_argument(flag, dest=key.replace("-", "_"), type=typ)
    return parser


def config_from_args(args, environ=None) -> ExperimentConfig:
    environ = os.environ if environ is None else environ
    path = args.config or environ.get("ELUDER_RL_CONFIG")
    if path:
        data, text = io.read_json(path)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", path)
        source, base = path, os.path.dirname(path) or "."
    else:
        data, text, source, base = {}, None, "<flags>", "."
    data = apply_env_overrides(data, environ)
    data["subcommand"] = args.subcommand
    if args.seed:
        data["seeds"] = args.seed
    if args.out:
        data["out"] = args.out
    if args.jobs:
        data["jobs"] = args.jobs
    for _, key, _ in _FLAGS[args.subcommand]:
        value = getattr(args, key.replace("-", "_"), None)
        if value is None:
            continue
        if key in _PARAM_KEYS:
            data.setdefault("params", {})[key] = value if value == "auto" or key != "gap" else float(value)
        else:
            data[key] = value
    if "episodes" in data and isinstance(data["episodes"], str) and data["episodes"].isdigit():
        data["episodes"] = int(data["episodes"])
    return ExperimentConfig.from_dict(data, source, text, base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
