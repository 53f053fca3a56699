"""Command line entry point: one subcommand per experiment kind plus run-all.

Exit codes: 0 all criteria passed, 1 some criterion failed (the report is
still written), 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError
from .harness import (KINDS, PRESETS, RUN_ALL, build_config, load_config, run_all,
                      run_experiment)
from .offspring import c_alpha_candidates, constants, make_spec

log = logging.getLogger("gwperc")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--seed", type=lambda s: int(s, 0), metavar="U64", help="master seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gwperc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        _common(p)
        p.add_argument("--preset", choices=sorted(k for k, v in PRESETS.items()
                                                  if v["kind"] == kind),
                       help="start from a named preset (default: the one named like the kind)")
    p = sub.add_parser("run-all", help="run every acceptance preset")
    _common(p)
    sub.add_parser("presets", help="list presets as JSON")
    return parser


def _overrides(args) -> dict:
    d = load_config(args.config) if args.config else {}
    if args.out is not None:
        d["out"] = args.out
    if args.threads is not None:
        d["threads"] = args.threads
    return d


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "presets":
            print(json.dumps(PRESETS, indent=2))
            return 0
        if args.command == "run-all":
            over = _overrides(args)
            _, summary = run_all(seed=args.seed, out=over.get("out", "reports"),
                                 threads=over.get("threads", 1), presets=RUN_ALL)
            for name, ok in summary.items():
                print(f"{name:8s} {'PASS' if ok else 'FAIL'}")
            return 0 if all(summary.values()) else 1
        base = args.preset or (args.command if args.command in PRESETS else args.command)
        cfg = build_config(base, _overrides(args), seed=args.seed)
        if cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
        log.info("running %s with seed %d", cfg.label, cfg.seed)
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if cfg.kind == "constants":
        spec = make_spec(cfg.distribution)
        print(json.dumps({"constants": constants(spec).as_dict(),
                          "c_alpha_candidates": c_alpha_candidates(spec)}, indent=2,
                         default=str))
    for c in report.criteria:
        print(f"{c.name:8s} {'PASS' if c.passed else 'FAIL'}")
    print(f"report: {report.paths.get('report')}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
