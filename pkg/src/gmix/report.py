"""Experiment reports: checks, measured values, JSON/CSV emission."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import thresholds

SCHEMA_VERSION = 1


@lru_cache(maxsize=None)
def build_id() -> str:
    """Content hash of the package sources (stable across machines)."""
    h = hashlib.sha256()
    root = Path(__file__).resolve().parent
    for p in sorted(root.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def exact(value) -> dict:
    out = {"mode": "exact", "value": _plain(value)}
    if isinstance(value, Fraction):
        out["value"] = float(value)
        out["fraction"] = f"{value.numerator}/{value.denominator}"
    return out


def mc(value, stderr, n_samples: int | None = None) -> dict:
    out = {"mode": "mc", "value": _plain(value), "stderr": _plain(stderr)}
    if n_samples is not None:
        out["n_samples"] = int(n_samples)
    return out


def _plain(x):
    """JSON-safe conversion for numpy scalars, arrays, fractions and sets."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_plain(v) for v in x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


@dataclass
class Check:
    name: str
    passed: bool
    hard: bool = False
    threshold: str | None = None
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {"name": self.name, "passed": bool(self.passed), "hard": self.hard}
        if self.threshold:
            d["threshold"] = self.threshold
        if self.detail:
            d["detail"] = _plain(self.detail)
        return d


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    seed: int | None = None
    measured: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    wall_clock: float | None = None

    def check(self, name: str, passed, *, hard: bool = False, threshold: str | None = None, **detail) -> bool:
        self.checks.append(Check(name, bool(passed), hard, threshold, detail))
        return bool(passed)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def hard_ok(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "build_id": build_id(),
            "thresholds_version": thresholds.VERSION,
            "seed": self.seed,
            "params": _plain(self.params),
            "measured": _plain(self.measured),
            "bounds": _plain(self.bounds),
            "checks": [c.as_dict() for c in self.checks],
            "notes": list(self.notes),
            "verdict": {"all_passed": self.ok, "hard_passed": self.hard_ok},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def filename(self) -> str:
        q = self.params.get("q", "na")
        return f"{self.experiment}-{q}-{self.seed}.json"

    def write(self, out_dir) -> Path:
        """Write atomically under a fresh name; existing reports are never replaced."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        base = self.filename()[:-5]
        text = self.to_json()
        fd, tmp = tempfile.mkstemp(dir=out, prefix=".tmp-", suffix=".json")
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        try:
            n = 0
            while True:
                name = out / (f"{base}.json" if n == 0 else f"{base}.{n}.json")
                try:
                    os.link(tmp, name)
                    break
                except FileExistsError:
                    n += 1
        finally:
            os.unlink(tmp)
        if self.wall_clock is not None:
            side = name.with_suffix(".timing.json")
            side.write_text(json.dumps({"wall_clock_s": self.wall_clock}) + "\n")
        return name


def write_plot_csv(path, header: tuple[str, str], rows) -> Path:
    """Two-column CSV such as q-vs-deviation for external plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, b in rows:
            w.writerow([_plain(a), _plain(b)])
    return path
