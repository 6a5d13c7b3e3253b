"""Experiment configurations: YAML in, validated nested dicts out.

Every subcommand has a default tree.  A user file is merged over it key by
key; keys absent from the defaults are rejected with their dotted path, and
keys whose default is :data:`REQUIRED` must be supplied.  Subtrees whose
default is :data:`FREE` (set and region descriptions) are passed through
unchecked here and validated by their own parsers.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math

import yaml

from .errors import ConfigError

__all__ = ["REQUIRED", "FREE", "DEFAULTS", "load_config", "resolve", "dump_config", "config_hash"]


class _Marker:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


REQUIRED = _Marker("REQUIRED")
FREE = _Marker("FREE")

TWO_PI = 2 * math.pi


def _grid(N=REQUIRED, d=2, L=TWO_PI):
    return {"d": d, "L": L, "N": N}


def _grid_pattern(period=TWO_PI / 8, width=0.15 * TWO_PI / 8, d=2):
    return {"type": "union", "children": [
        {"type": "strips", "normal": [1.0 if j == i else 0.0 for j in range(d)],
         "width": width, "period": period, "offset": 0.0}
        for i in range(d)
    ]}


DEFAULTS: dict[str, dict] = {
    "gcc": {
        "grid": {"d": 2, "L": TWO_PI},
        "set": FREE,
        "k": 1,
        "ell": REQUIRED,
        "eps": None,
        "resolution": None,
        "budget": {"centers": 256, "random_orientations": 16, "refine_steps": 24, "refine_candidates": 4},
        "seed": 0,
        "threads": 1,
    },
    "flatness": {
        # only needed for regions, so not required here
        "grid": _grid(N=None),
        "points": None,
        "region": FREE,
        "codim": 1,
        "center": None,
        "radius": None,
        "seed": 0,
        "threads": 1,
    },
    "pls_sweep": {
        "grid": _grid(),
        "set": FREE,
        "delta": REQUIRED,
        "family": "annulus",
        "R_list": REQUIRED,
        "beta": 2.0,
        "sigma": FREE,
        "tol": 1e-10,
        "max_iter": 500,
        "dense_cap": 4096,
        "gcc": None,
        "bounded_ratio": 3.0,
        "seed": 0,
        "threads": 1,
    },
    "wave": {
        "grid": _grid(),
        "s": REQUIRED,
        "damping": FREE,
        "dt": 0.05,
        "horizon": REQUIRED,
        "stride": 10,
        "fit_model": "polynomial",
        "t0_fraction": 0.2,
        "data": {"width": None, "filter_power": 1.0, "center": None},
        "snapshots": {"count": 0, "downsample": 1},
        "conservation_tol": 1e-12,
        "seed": 0,
        "threads": 1,
    },
    "resolvent": {
        "grid": _grid(),
        "s": REQUIRED,
        "set": FREE,
        "delta": 0.0,
        "lambda_max": REQUIRED,
        "lambdas": None,
        "spacing_factor": 0.5,
        "band_rtol": 1e-2,
        "tol": 1e-10,
        "seed": 0,
        "threads": 1,
    },
    "suite": {
        "criteria": None,
        "seed": 0,
        "threads": 1,
    },
}


def _merge(default, user, path):
    if default is FREE:
        return copy.deepcopy(user)
    if isinstance(default, dict):
        if user is None:
            user = {}
        if not isinstance(user, dict):
            raise ConfigError(f"expected a mapping, got {type(user).__name__}", path or "<root>")
        out = {}
        for key in user:
            if key not in default:
                raise ConfigError("unknown key", f"{path}.{key}" if path else str(key))
        for key, dval in default.items():
            sub = f"{path}.{key}" if path else key
            if key in user:
                out[key] = _merge(dval, user[key], sub)
            elif dval is REQUIRED:
                raise ConfigError("required key is missing", sub)
            elif dval is FREE:
                out[key] = None
            else:
                out[key] = _merge(dval, None, sub) if isinstance(dval, dict) else copy.deepcopy(dval)
        return out
    return copy.deepcopy(user)


def resolve(command: str, user: dict | None) -> dict:
    """Merge ``user`` over the defaults of ``command`` and validate."""
    try:
        default = DEFAULTS[command]
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None
    return _merge(default, user or {}, "")


def load_config(command: str, path=None, text: str | None = None) -> dict:
    """Read a YAML file (or string) and :func:`resolve` it."""
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err.strerror}", str(path)) from None
    try:
        doc = yaml.safe_load(text) if text else {}
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML: {err}") from None
    return resolve(command, doc)


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=None)


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()
