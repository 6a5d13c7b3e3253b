"""Experiment records, atomic file output and the result cache.

A run directory is ``<out>/<command>-<hash12>/`` and holds ``record.json``,
the resolved ``config.yaml`` and one CSV per table.  Every file is written
to a temporary name in the same directory and renamed into place, so an
interrupted run never leaves a half-written record that the cache would
later trust.
"""
from __future__ import annotations

import csv
import io
import json
import os
import subprocess
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from . import __version__
from .config import config_hash, dump_config

__all__ = ["ExperimentRecord", "version_string", "atomic_write", "run_dir", "save_record", "load_record", "strip_columns"]

TIMING_COLUMNS = ("seconds",)


@lru_cache(maxsize=1)
def version_string() -> str:
    """``git describe`` of the source tree, or ``v<package version>`` outside git."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        desc = out.stdout.strip()
        if desc:
            return f"v{__version__}-g{desc}" if not desc.startswith("v") else desc
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


@dataclass
class ExperimentRecord:
    """Everything a run produced.  ``tables`` maps CSV file names to text."""

    command: str
    config: dict
    results: dict = field(default_factory=dict)
    verdict: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    version: str = field(default_factory=version_string)
    cached: bool = False

    @property
    def config_hash(self) -> str:
        return config_hash({"command": self.command, **self.config})

    def to_dict(self, timing: bool = True) -> dict:
        doc = {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "version": self.version,
            "results": self.results,
            "verdict": self.verdict,
            "tables": sorted(self.tables),
        }
        if timing:
            doc["timings"] = self.timings
        return doc

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` via temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def run_dir(out, command: str, cfg: dict) -> Path:
    return Path(out) / f"{command}-{config_hash({'command': command, **cfg})[:12]}"


def save_record(rec: ExperimentRecord, out) -> Path:
    d = run_dir(out, rec.command, rec.config)
    for name, text in rec.tables.items():
        atomic_write(d / name, text)
    atomic_write(d / "config.yaml", dump_config(rec.config))
    # the record goes last: its presence marks the directory complete
    atomic_write(d / "record.json", rec.to_json())
    return d


def load_record(out, command: str, cfg: dict) -> ExperimentRecord | None:
    """Cached record for ``(command, cfg)``, or ``None``."""
    d = run_dir(out, command, cfg)
    try:
        doc = json.loads((d / "record.json").read_text())
    except (OSError, ValueError):
        return None
    tables = {}
    for name in doc.get("tables", []):
        try:
            tables[name] = (d / name).read_text()
        except OSError:
            return None
    return ExperimentRecord(
        command=doc["command"],
        config=doc["config"],
        results=doc.get("results", {}),
        verdict=doc.get("verdict", {}),
        timings=doc.get("timings", {}),
        tables=tables,
        version=doc.get("version", ""),
        cached=True,
    )


def strip_columns(csv_text: str, drop=TIMING_COLUMNS) -> str:
    """CSV text without the named columns (used to compare runs modulo timing)."""
    rows = list(csv.reader(io.StringIO(csv_text)))
    if not rows:
        return ""
    keep = [i for i, c in enumerate(rows[0]) if c not in drop]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([r[i] for i in keep])
    return buf.getvalue()
