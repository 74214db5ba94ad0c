"""CSV and JSON reports.

The CSV has one row per estimate with columns ``quantity, geometry, bundle,
t, x, value_0.., se_0.., n, seed, scheme, dt`` (whitespace-free, readable by
gnuplot with ``set datafile separator ','``).  The JSON report mirrors the
rows and adds the config echo, the assertions, fitted constants, a version
string and a timestamp.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class Row:
    quantity: str
    geometry: str
    bundle: str
    t: float
    x: list
    value: list
    se: list
    n: int
    seed: int
    scheme: str
    dt: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class Assertion:
    """An explicit (estimate, SE, tolerance) check."""

    name: str
    estimate: float
    se: float
    target: float
    tolerance: float
    passed: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class Report:
    quantity: str
    config: dict
    rows: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name, estimate, se, target, tolerance, passed=None):
        ok = abs(estimate - target) <= tolerance if passed is None else passed
        self.assertions.append(Assertion(name, float(estimate), float(se), float(target), float(tolerance), bool(ok)))
        return ok


def _flat(v):
    return [float(a) for a in np.ravel(np.asarray(v, dtype=float))]


def make_row(quantity, cfg, t, x, estimate) -> Row:
    ens = cfg.ensemble
    return Row(quantity, cfg.geometry.id, cfg.bundle.name, float(t), _flat(x), _flat(estimate.value), _flat(estimate.se),
               int(estimate.n), ens.seed, ens.scheme, ens.dt)


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here, capture_output=True,
                             text=True, timeout=5, check=True)
        return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v):
    return repr(float(v)) if v == v else "nan"


def write_csv(report: Report, path):
    width = max([len(r.value) for r in report.rows] or [1])
    header = ["quantity", "geometry", "bundle", "t", "x"] + [f"value_{i}" for i in range(width)] + \
        [f"se_{i}" for i in range(width)] + ["n", "seed", "scheme", "dt"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in report.rows:
            pad = [""] * (width - len(r.value))
            w.writerow([r.quantity, r.geometry, r.bundle, _fmt(r.t), ";".join(_fmt(a) for a in r.x)]
                       + [_fmt(v) for v in r.value] + pad + [_fmt(v) for v in r.se] + pad
                       + [r.n, r.seed, r.scheme, _fmt(r.dt)])


def report_dict(report: Report, timestamp=None):
    return _clean({
        "version": version_string(),
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "quantity": report.quantity,
        "config": report.config,
        "rows": [r.as_dict() for r in report.rows],
        "assertions": [a.as_dict() for a in report.assertions],
        "fits": report.fits,
        "passed": report.passed,
    })


def write_json(report: Report, path, timestamp=None):
    with open(path, "w") as fh:
        json.dump(report_dict(report, timestamp), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report(report: Report, out_dir, stem=None):
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    stem = stem or report.quantity
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    write_csv(report, csv_path)
    write_json(report, json_path)
    return csv_path, json_path
