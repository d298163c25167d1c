"""Command line entry point: ``vfdiff {steady,evolve,sweep,classify,fit-rate,verify}``.

Exit codes: 0 success, 1 validation error, 2 run failure, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config

EXIT_OK, EXIT_INVALID, EXIT_RUN, EXIT_VERIFY = 0, 1, 2, 3


def _float(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vfdiff", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("steady", "solve and calibrate the steady state"),
                        ("evolve", "run one experiment"),
                        ("sweep", "run a parameter sweep")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("classify", help="report the convergence regime")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--r", type=_float, default=None)
    p.add_argument("--s", type=_float, default=None)
    p.add_argument("--time-dependent", action="store_true", help="source varies in time")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("fit-rate", help="fit an exponential decay rate to a diagnostics CSV")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--column", default="h1_dist")
    p.add_argument("--floor", type=float, default=1e-6)
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("--suite", default="all")
    p.add_argument("--out", type=Path, default=None)
    return parser


def _emit(obj, out: Path = None, name: str = None) -> None:
    from .io import write_json

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / name, obj)
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def cmd_steady(args) -> int:
    from .harness import run_steady

    cfg = parse_config(args.config)
    _emit(run_steady(cfg, args.out))
    return EXIT_OK


def cmd_evolve(args) -> int:
    from .harness import run_experiment

    cfg = parse_config(args.config)
    if cfg.is_sweep:
        raise ConfigError(["config lists several (k, r, s) points; use the sweep command"])
    summary = run_experiment(cfg, args.out)
    _emit(summary.to_dict())
    return EXIT_OK if summary.status == "ok" else EXIT_RUN


def cmd_sweep(args) -> int:
    from .harness import run_sweep

    cfg = parse_config(args.config)
    summaries = run_sweep(cfg, args.out, jobs=args.jobs)
    out = args.out if args.out is not None else Path(cfg.output_dir)
    print((out / "sweep.csv").read_text(), end="")
    return EXIT_OK if all(s.status == "ok" for s in summaries) else EXIT_RUN


def cmd_classify(args) -> int:
    from .criticality import classify_regime

    if args.config is not None:
        cfg = parse_config(args.config)
        N, k, r, s = cfg.dimension, cfg.k, cfg.r, cfg.s
        homogeneous = cfg.time_profile == "constant" and cfg.source_profile != "file"
    else:
        missing = [n for n in ("N", "k") if getattr(args, n) is None]
        if missing:
            raise ConfigError([f"--{n} is required without --config" for n in missing])
        N, k = args.N, args.k
        r = args.r if args.r is not None else math.inf
        s = args.s if args.s is not None else math.inf
        homogeneous = not args.time_dependent
    report = classify_regime(N, k, r, s, time_homogeneous=homogeneous)
    _emit(report.to_dict(), args.out, "regime.json")
    return EXIT_OK


def cmd_fit_rate(args) -> int:
    from .harness import fit_rate

    table = np.genfromtxt(args.input, delimiter=",", names=True)
    if args.column not in table.dtype.names:
        raise ConfigError([f"column {args.column!r} not in {args.input}"])
    fit, note = fit_rate(table["t"], table[args.column], args.floor, args.t_min)
    if fit is None:
        print(note, file=sys.stderr)
        return EXIT_RUN
    _emit(fit.to_dict(), args.out, "rate_fit.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    try:
        checks = run_suite(args.suite)
    except KeyError as exc:
        raise ConfigError([exc.args[0]]) from exc
    for chk in checks:
        print(chk.line())
    if args.out is not None:
        from .io import write_json

        args.out.mkdir(parents=True, exist_ok=True)
        write_json(args.out / f"verify_{args.suite}.json", [c.to_dict() for c in checks])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "classify": cmd_classify,
    "fit-rate": cmd_fit_rate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
