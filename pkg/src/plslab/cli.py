"""Command line entry point: ``plslab <command> [--config FILE] [flags]``.

Flags override the config file, which overrides the built-in defaults.
Results go to ``<out>/<command>-<hash>/``; a second run with the same
resolved config reuses that directory unless ``--force`` is given.

Exit codes: 0 success, 1 numerical non-convergence, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import yaml

from .config import load_config, resolve
from .errors import ConfigError, ConvergenceError, PlsLabError
from .experiments import RUNNERS
from .records import load_record, run_dir, save_record

__all__ = ["main", "build_parser", "run_command"]

COMMANDS = {
    "gcc": "gcc",
    "flatness": "flatness",
    "pls-sweep": "pls_sweep",
    "wave": "wave",
    "resolvent": "resolvent",
    "suite": "suite",
}

GNUPLOT = {
    "pls_sweep": (
        "sweep.csv",
        "set datafile separator ','\nset key autotitle columnhead\nset logscale y\n"
        "set xlabel 'R'\nset ylabel 'C(R)'\nplot '{csv}' using 1:5 with linespoints\n",
    ),
    "wave": (
        "energy.csv",
        "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\n"
        "set xlabel '1+t'\nset ylabel 'E(t)'\nplot '{csv}' using (1+$1):2 with lines\n",
    ),
    "resolvent": (
        "lambda.csv",
        "set datafile separator ','\nset key autotitle columnhead\nset logscale y\n"
        "set xlabel 'lambda'\nset ylabel 'lambda_min(H)'\nplot '{csv}' using 1:2 with linespoints\n",
    ),
}


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plslab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML config file, or the name of a bundled config")
        sp.add_argument("--out", default="results", help="output directory (default: results)")
        sp.add_argument("--force", action="store_true", help="recompute even if a cached record exists")
        sp.add_argument("--threads", type=int, help="FFT threads (default: PLSLAB_THREADS or 1)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--N", type=int, dest="grid_N", help="grid points per side")
        return sp

    sp = common(sub.add_parser("gcc", help="estimate the GCC constant of a set"))
    sp.add_argument("--set", dest="set_file", help="YAML/JSON set description")
    sp.add_argument("--k", type=int)
    sp.add_argument("--ell", type=float)
    sp.add_argument("--budget", type=int, help="number of sampled cube centers")

    sp = common(sub.add_parser("flatness", help="flatness of a point set or spectral mask"))
    sp.add_argument("--points", dest="points_file", help="YAML/JSON list of points")
    sp.add_argument("--region", dest="region_file", help="YAML/JSON spectral region")
    sp.add_argument("--codim", type=int)

    sp = common(sub.add_parser("pls-sweep", help="observability constant over a radius sweep"))
    sp.add_argument("--set", dest="set_file")
    sp.add_argument("--family", choices=["annulus", "ball", "shell"])
    sp.add_argument("--R-list", dest="R_list", type=_floats)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--delta", type=float)

    sp = common(sub.add_parser("wave", help="damped fractional wave evolution and decay fit"))
    sp.add_argument("--s", type=float)
    sp.add_argument("--damping", dest="damping_file", help="YAML/JSON damping profile")
    sp.add_argument("--dt", type=float)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--fit-model", dest="fit_model", choices=["polynomial", "exponential", "both"])

    sp = common(sub.add_parser("resolvent", help="uniform-in-lambda resolvent lower bound"))
    sp.add_argument("--s", type=float)
    sp.add_argument("--lambda-max", dest="lambda_max", type=float)
    sp.add_argument("--set", dest="set_file")
    sp.add_argument("--delta", type=float)

    sp = common(sub.add_parser("suite", help="run the acceptance experiments"))
    sp.add_argument("--criteria", type=_ints, help="comma-separated criterion numbers")
    return p


def _read_doc(path, key):
    try:
        with open(path) as fh:
            return yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}", key) from None
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML in {path}: {err}", key) from None


def _config_text(name):
    path = Path(name)
    if path.exists():
        return path.read_text()
    bundled = resources.files("plslab") / "configs" / f"{name}.yaml"
    if bundled.is_file():
        return bundled.read_text()
    raise ConfigError(f"no such file or bundled config: {name}", "--config")


def resolve_args(args) -> tuple[str, dict]:
    command = COMMANDS[args.command]
    doc = yaml.safe_load(_config_text(args.config)) if args.config else {}
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping", "<root>")
    overrides = {
        "seed": args.seed,
        "k": getattr(args, "k", None),
        "ell": getattr(args, "ell", None),
        "codim": getattr(args, "codim", None),
        "family": getattr(args, "family", None),
        "R_list": getattr(args, "R_list", None),
        "beta": getattr(args, "beta", None),
        "delta": getattr(args, "delta", None),
        "s": getattr(args, "s", None),
        "dt": getattr(args, "dt", None),
        "horizon": getattr(args, "horizon", None),
        "fit_model": getattr(args, "fit_model", None),
        "lambda_max": getattr(args, "lambda_max", None),
        "criteria": getattr(args, "criteria", None),
    }
    for key, val in overrides.items():
        if val is not None:
            doc[key] = val
    for attr, key in (("set_file", "set"), ("damping_file", "damping"), ("region_file", "region"), ("points_file", "points")):
        path = getattr(args, attr, None)
        if path:
            doc[key] = _read_doc(path, key)
    if getattr(args, "budget", None) is not None:
        doc.setdefault("budget", {})["centers"] = args.budget
    if args.grid_N is not None:
        doc.setdefault("grid", {})["N"] = args.grid_N
    threads = args.threads if args.threads is not None else doc.get("threads")
    if threads is None:
        threads = int(os.environ.get("PLSLAB_THREADS", "1") or 1)
    doc["threads"] = threads
    return command, resolve(command, doc)


def run_command(command: str, cfg: dict, out, force=False, echo=print):
    """Run (or fetch from cache) one experiment and write its directory."""
    threads = int(cfg.get("threads", 1))
    if threads < 1:
        raise ConfigError("must be at least 1", "threads")
    os.environ["PLSLAB_THREADS"] = str(threads)
    if not force:
        rec = load_record(out, command, cfg)
        if rec is not None:
            echo(f"cached: {run_dir(out, command, cfg)}")
            return rec
    t0 = time.perf_counter()
    if command == "suite":
        from .suite import run_suite

        rec = run_suite(cfg, echo=echo)
    elif command == "wave":
        rec = RUNNERS[command](cfg, out_dir=run_dir(out, command, cfg) / "snapshots")
    else:
        rec = RUNNERS[command](cfg)
    rec.timings["total_seconds"] = time.perf_counter() - t0
    if command in GNUPLOT:
        csv_name, script = GNUPLOT[command]
        rec.tables["plot.gp"] = script.format(csv=csv_name)
    save_record(rec, out)
    return rec


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        command, cfg = resolve_args(args)
        rec = run_command(command, cfg, args.out, force=args.force)
    except ConfigError as err:
        print(f"plslab: config error: {err}", file=sys.stderr)
        return 2
    except ConvergenceError as err:
        print(f"plslab: no convergence: {err}", file=sys.stderr)
        return 1
    except PlsLabError as err:
        print(f"plslab: {err}", file=sys.stderr)
        return 2
    print(json.dumps({"dir": str(run_dir(args.out, command, cfg)), "verdict": rec.verdict}, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
