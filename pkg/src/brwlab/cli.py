"""Command-line driver: ``brwlab <command> [--config FILE] [flags]``.

Flags override config-file values; ``--set key=value`` reaches any config
key.  Exit codes: 0 success, 2 config error, 3 invariant violation,
4 Violated verdict, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import campaigns as C
from .config import ConfigError, load_config, parse_value

COMMANDS = {
    "oracle-grid": lambda cfg, out, workers: C.oracle_grid_campaign(cfg, out),
    "couple": C.couple_campaign,
    "verify-corollary": C.corollary_campaign,
    "verify-counts": C.counts_campaign,
    "simulate": C.simulate_campaign,
}

# flag name -> (config key, help)
_SHARED = {
    "--seed": ("seed", "master seed"),
    "--replicas": ("replicas", "number of replicas"),
    "--out-dir": ("out_dir", "output directory"),
    "--workers": ("workers", "worker processes (0 = all cores)"),
    "--law": ("law", "offspring probabilities, e.g. 0.5,0,0.5"),
    "--survival": ("survival", "parent survival probability (generalised walk)"),
    "--n": ("n", "box radius"),
    "--d": ("d", "dimension"),
    "--horizon": ("horizon", "generation horizon (default 10 n^2)"),
    "--cap": ("cap", "population cap"),
    "--alpha": ("alpha", "significance level"),
}

_SPECIFIC = {
    "oracle-grid": {"--kernel": ("kernel", "lazy or strict"), "--t-max": ("t_max", "CDF audit horizon"),
                    "--pairs": ("pairs", "extra CDF pairs 'x,y <= x2,y2;...'")},
    "couple": {"--kind": ("kind", "axis1, diag or axis2"), "--mode": ("mode", "hitting, free or marginal"),
               "--steps": ("steps", "generations for free mode"),
               "--check-every": ("check_every", "invariant check period")},
    "verify-corollary": {"--lam": ("lam", "birth rate per neighbour"), "--t": ("t", "time"),
                         "--ladder": ("ladder", "scaling values N, e.g. 20,40,80"),
                         "--probes": ("probes", "probe sites 'x,y;...'"),
                         "--pairs": ("pairs", "ordered pairs 'x,y <= x2,y2;...'"),
                         "--gamma-replicas": ("gamma_replicas", "Monte Carlo replicas of the discrete walk")},
    "verify-counts": {"--kernel": ("kernel", "lazy, strict or generalized"),
                      "--steps": ("steps", "generations"), "--probes": ("probes", "probe sites 'x,y;...'"),
                      "--pairs": ("pairs", "ordered pairs 'x,y <= x2,y2;...'"),
                      "--start": ("start", "start site")},
    "simulate": {"--kernel": ("kernel", "lazy, strict or generalized"), "--start": ("start", "start site"),
                 "--cdf-times": ("cdf_times", "times for the oracle comparison")},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brwlab", description="Branching random walk verification lab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
        for flag, (key, help_) in {**_SHARED, **_SPECIFIC[name]}.items():
            p.add_argument(flag, dest=key, metavar=key.upper(), help=help_)
    return parser


def _overrides(args: argparse.Namespace, name: str) -> dict:
    values = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = parse_value(key.strip(), raw)
    for key, _ in {**_SHARED, **_SPECIFIC[name]}.values():
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = parse_value(key, raw)
    return values


def _dump_state(out_dir: str, exc: C.InvariantFailure) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "invariant_violation.json")
    C.write_json(path, {"replica": exc.replica, "problems": exc.problems, "state": exc.dump})
    return path


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args, args.command))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return C.EXIT_CONFIG
    try:
        result = COMMANDS[args.command](cfg, cfg.out_dir, cfg.resolved_workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return C.EXIT_CONFIG
    except C.CensoringExceeded as exc:
        print(f"censoring: {exc}; raise the cap", file=sys.stderr)
        return C.EXIT_CONFIG
    except C.InvariantFailure as exc:
        try:
            path = _dump_state(cfg.out_dir, exc)
            print(f"invariant violation: {exc}; state written to {path}", file=sys.stderr)
        except OSError:
            print(f"invariant violation: {exc}", file=sys.stderr)
        return C.EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return C.EXIT_IO
    summary = {"command": args.command, "exit_code": result.exit_code, "files": result.files}
    print(json.dumps(summary, sort_keys=True))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
