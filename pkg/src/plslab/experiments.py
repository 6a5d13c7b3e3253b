"""Config-driven experiment runners behind the command line.

Each ``run_*`` takes a resolved config (see :mod:`plslab.config`) and returns
an :class:`~plslab.records.ExperimentRecord`.  Runners never touch the disk
except for wave snapshots, which need an output directory.
"""
from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import GccBudget, estimate_gcc, flatness, set_from_dict
from .lattice import TorusGrid
from .observability import radius_sweep, sweep_csv
from .records import ExperimentRecord
from .resolvent import ResolventProblem, check_lambda_grid, lambda_grid, uniform_lower_bound
from .spectra import manifold_from_dict, mask_flatness, region_from_dict, region_mask
from .waves import damping_field, evolve, fit_decay, initial_state, write_snapshot

__all__ = ["run_gcc", "run_flatness", "run_pls_sweep", "run_wave", "run_resolvent", "RUNNERS"]


def _grid(cfg) -> TorusGrid:
    g = cfg["grid"]
    if g.get("N") is None:
        raise ConfigError("required key is missing", "grid.N")
    try:
        return TorusGrid(int(g["d"]), float(g["L"]), g["N"])
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err), "grid") from None


def _parse(parser, doc, path, required=True):
    if doc is None:
        if required:
            raise ConfigError("required key is missing", path)
        return None
    try:
        return parser(doc)
    except (TypeError, ValueError, KeyError) as err:
        raise ConfigError(f"invalid description: {err}", path) from None


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def run_gcc(cfg: dict) -> ExperimentRecord:
    spec = _parse(set_from_dict, cfg["set"], "set")
    try:
        budget = GccBudget(**cfg["budget"])
    except ValueError as err:
        raise ConfigError(str(err), "budget") from None
    est, secs = _timed(
        lambda: estimate_gcc(
            spec,
            int(cfg["k"]),
            float(cfg["ell"]),
            d=int(cfg["grid"]["d"]),
            L=float(cfg["grid"]["L"]),
            budget=budget,
            seed=int(cfg["seed"]),
            resolution=cfg["resolution"],
            eps=cfg["eps"],
        )
    )
    return ExperimentRecord(
        "gcc",
        cfg,
        results=est.to_dict(),
        verdict={"gcc_candidate": est.gamma_hat > 0},
        timings={"seconds": secs},
    )


def run_flatness(cfg: dict) -> ExperimentRecord:
    codim = int(cfg["codim"])
    t0 = time.perf_counter()
    if cfg["points"] is not None:
        pts = np.asarray(cfg["points"], dtype=float)
        value = flatness(pts, codim)
        source, count = "points", len(pts)
    elif cfg["region"] is not None:
        region = _parse(region_from_dict, cfg["region"], "region")
        grid = _grid(cfg)
        mask = region_mask(region, grid)
        value = mask_flatness(mask, grid, codim, cfg["center"], cfg["radius"])
        source, count = "region", int(mask.sum())
    else:
        raise ConfigError("give either points or region", "points")
    return ExperimentRecord(
        "flatness",
        cfg,
        results={"flatness": value, "codim": codim, "source": source, "points": count},
        timings={"seconds": time.perf_counter() - t0},
    )


def run_pls_sweep(cfg: dict) -> ExperimentRecord:
    grid = _grid(cfg)
    E = _parse(set_from_dict, cfg["set"], "set")
    family = cfg["family"]
    if family not in ("annulus", "ball", "shell"):
        raise ConfigError(f"unknown family {family!r}", "family")
    sigma = _parse(manifold_from_dict, cfg["sigma"], "sigma", required=family == "shell")
    gcc = cfg["gcc"]
    if gcc is not None:
        try:
            gcc = (float(gcc["ell"]), float(gcc["gamma"]))
        except (TypeError, KeyError, ValueError):
            raise ConfigError("expected a mapping with ell and gamma", "gcc") from None
    rows, secs = _timed(
        lambda: radius_sweep(
            E,
            float(cfg["delta"]),
            family,
            [float(r) for r in cfg["R_list"]],
            grid,
            beta=None if family == "ball" else float(cfg["beta"]),
            sigma=sigma,
            tol=float(cfg["tol"]),
            max_iter=int(cfg["max_iter"]),
            seed=int(cfg["seed"]),
            dense_cap=int(cfg["dense_cap"]),
            gcc=gcc,
        )
    )
    Cs = [r.C for r in rows]
    finite = all(math.isfinite(c) for c in Cs)
    ratio = max(Cs) / min(Cs) if finite else math.inf
    verdict = {"ratio": ratio, "bounded": bool(finite and ratio <= float(cfg["bounded_ratio"]))}
    return ExperimentRecord(
        "pls_sweep",
        cfg,
        results={"R": [r.R for r in rows], "C": Cs, "lambda_min": [r.lambda_min for r in rows]},
        verdict=verdict,
        timings={"seconds": secs},
        tables={"sweep.csv": sweep_csv(rows)},
    )


def run_wave(cfg: dict, out_dir=None) -> ExperimentRecord:
    grid = _grid(cfg)
    s = float(cfg["s"])
    damping = _parse(set_from_dict, cfg["damping"], "damping", required=False)
    if damping is not None and not damping.is_profile:
        raise ConfigError("damping must be a profile (constant, bump, smoothed, sum)", "damping")
    try:
        gamma = damping_field(damping, grid)
    except ValueError as err:
        raise ConfigError(str(err), "damping") from None
    data = cfg["data"]
    try:
        state = initial_state(grid, s, data["center"], data["width"], float(data["filter_power"]))
    except ValueError as err:
        raise ConfigError(str(err), "data.width") from None
    dt, horizon, stride = float(cfg["dt"]), float(cfg["horizon"]), int(cfg["stride"])
    snap = None
    count = int(cfg["snapshots"]["count"])
    if count > 0 and out_dir is not None:
        n_samples = int(round(horizon / dt)) // stride + 1
        every = max(1, n_samples // count)
        folder = Path(out_dir)
        folder.mkdir(parents=True, exist_ok=True)
        seen = [0]

        def snap(st):
            if seen[0] % every == 0:
                write_snapshot(folder / f"w_{seen[0]:06d}.bin", st, int(cfg["snapshots"]["downsample"]))
            seen[0] += 1

    series, secs = _timed(lambda: evolve(state, gamma, dt, horizon, stride, snapshot=snap))
    e = series.energy
    results = {"E0": float(e[0]), "E_final": float(e[-1]), "steps": series.steps}
    steps_ratio = e[1:] / e[:-1]
    verdict = {"monotone": bool(np.all(steps_ratio <= 1 + 1e-12 * stride))}
    if not np.any(gamma > 0):
        drift = float(np.max(np.abs(e - e[0])) / e[0])
        results["max_relative_drift"] = drift
        verdict["conserved"] = drift <= float(cfg["conservation_tol"])
    else:
        t0 = float(cfg["t0_fraction"]) * horizon
        models = ["polynomial", "exponential"] if cfg["fit_model"] == "both" else [cfg["fit_model"]]
        for model in models:
            if model not in ("polynomial", "exponential"):
                raise ConfigError(f"unknown model {model!r}", "fit_model")
            results[model] = fit_decay(series, model, t0=t0).to_dict()
    results["data"] = "gaussian bump, spectrally filtered with power %g" % float(data["filter_power"])
    return ExperimentRecord(
        "wave", cfg, results=results, verdict=verdict, timings={"seconds": secs},
        tables={"energy.csv": series.to_csv()},
    )


def run_resolvent(cfg: dict) -> ExperimentRecord:
    grid = _grid(cfg)
    s = float(cfg["s"])
    E = _parse(set_from_dict, cfg["set"], "set")
    lmax = float(cfg["lambda_max"])
    if cfg["lambdas"] is None:
        lams = lambda_grid(lmax, s, float(cfg["spacing_factor"]))
    else:
        lams = cfg["lambdas"]
    lams = check_lambda_grid(lams, s, lmax)
    problem = ResolventProblem(grid, s, E, float(cfg["delta"]), lams)
    res, secs = _timed(
        lambda: uniform_lower_bound(
            problem, tol=float(cfg["tol"]), seed=int(cfg["seed"]), band_rtol=float(cfg["band_rtol"])
        )
    )
    return ExperimentRecord(
        "resolvent",
        cfg,
        results=res.summary(),
        verdict={"positive": res.c_star > 0},
        timings={"seconds": secs},
        tables={"lambda.csv": res.to_csv()},
    )


RUNNERS = {
    "gcc": run_gcc,
    "flatness": run_flatness,
    "pls_sweep": run_pls_sweep,
    "wave": run_wave,
    "resolvent": run_resolvent,
}
