"""Command-line entry point: ``interp-solve run | sweep | report``.

Exit codes: 0 success, 1 validation or I/O error, 2 divergence detected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .core import InterpSolveError
from .runner import RunConfig, aggregate, execute, expand_grid, preset_runs, sweep

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2

# flag name -> RunConfig field
_FLAGS = {
    "problem": "problem",
    "a": "a",
    "b": "b",
    "L": "L",
    "rho": "rho",
    "solver": "solver",
    "gamma": "gamma",
    "lambda": "lam",
    "tau": "tau",
    "alpha": "alpha",
    "K": "K",
    "sigma0": "sigma0",
    "batch": "batch",
    "seed": "seed",
    "z0": "z0",
    "checks": "checks",
    "target": "target",
    "residual": "residual",
    "max-calls": "max_calls",
    "inner-tol": "inner_tol",
    "output": "output",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    for flag, dest in _FLAGS.items():
        p.add_argument(f"--{flag}", dest=dest, default=None, metavar=flag.upper().replace("-", "_"))
    p.add_argument("--unchecked", action="store_true", default=None,
                   help="record hypothesis violations as warnings instead of failing")


def _load_config(args) -> RunConfig:
    kw = {}
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        base = RunConfig.from_text(text, args.config)
        kw = dict(vars(base))
    flags = {dest: getattr(args, dest) for dest in _FLAGS.values() if getattr(args, dest) is not None}
    if args.unchecked:
        flags["unchecked"] = "true"
    cfg = RunConfig.from_strings(flags, "<flags>")
    merged = dict(kw)
    merged.update({k: getattr(cfg, k) for k in flags})
    return RunConfig(**merged) if merged else cfg


def _jobs(value) -> int:
    if value is None:
        value = os.environ.get("INTERP_SOLVE_JOBS", "1")
    n = int(value)
    if n < 1:
        raise ValueError("--jobs must be >= 1")
    return n


def cmd_run(args) -> int:
    cfg = _load_config(args)
    cfg.validate()
    rep = execute(cfg)
    print(f"{cfg.solver} on {cfg.problem}: {rep['stop_reason']} after {rep['iterations']} steps, "
          f"{rep['oracle_calls']} oracle calls, residual {rep['final_residual']:.3e}")
    return EXIT_DIVERGED if rep["status"] == "divergence" else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if args.preset:
        runs = preset_runs(args.preset, cfg)
    else:
        axes = {}
        for item in args.grid or []:
            if "=" not in item:
                raise ValueError(f"--grid expects key=v1,v2,..., got {item!r}")
            key, vals = item.split("=", 1)
            key = _FLAGS.get(key, key)
            axes[key] = [v for v in vals.split(",") if v]
        runs = expand_grid(cfg, axes)
    rows = sweep(cfg, runs, args.out, _jobs(args.jobs))
    done = sum(r["status"] in ("ok", "divergence") for r in rows)
    for r in rows:
        print(f"{r['index']:3d} {r['label']:<32} {r['status']:<10} {r['stop_reason']:<10} {r['final_residual']}")
    return EXIT_OK if done >= 1 else EXIT_INVALID


def cmd_report(args) -> int:
    doc = aggregate(args.paths)
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="interp-solve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one solver configuration")
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid or a figure preset")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                         help="grid axis; repeat for a Cartesian product")
    p_sweep.add_argument("--preset", choices=["fig-forsaken", "fig-la"])
    p_sweep.add_argument("--out", default="sweep", help="output directory")
    p_sweep.add_argument("--jobs", default=None, help="worker processes (default $INTERP_SOLVE_JOBS or 1)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="aggregate bound reports")
    p_rep.add_argument("paths", nargs="*", help="report.json files or directories")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InterpSolveError, ValueError, OSError) as exc:
        print(f"interp-solve: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
