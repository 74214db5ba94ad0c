"""Experiment configuration files.

A config is a TOML file with the tables ``[geometry]``, ``[bundle]`` (plus
``[generic]`` for user matrices), ``[run]`` and ``[experiment]``::

    [geometry]
    id = "half_space"
    dimension = 2

    [bundle]
    id = "forms:1"

    [run]
    dt = 1e-3
    paths = 100000
    seed = 7

    [experiment]
    quantity = "semigroup"
    x = [0.0, 0.5]
    t = [1.0]
    section = { center = [0.0, 1.0], radius = 0.5, components = [1.0, 0.0] }
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, replace

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .bundles import BundleModel, make_bundle
from .errors import ConfigError
from .estimators import EnsembleConfig
from .geometry import ModelGeometry, make_geometry

QUANTITIES = ("semigroup", "kernel", "conservation", "domination", "localtime", "l1")


@dataclass
class ExperimentConfig:
    geometry: ModelGeometry
    bundle: BundleModel
    ensemble: EnsembleConfig
    experiment: dict
    raw: dict = field(default_factory=dict)
    source: str = ""

    @property
    def quantity(self):
        return self.experiment.get("quantity", "semigroup")

    def with_overrides(self, **overrides):
        kw = {k: v for k, v in overrides.items() if v is not None}
        if not kw:
            return self
        ens = replace(self.ensemble, **kw)
        raw = dict(self.raw)
        raw["run"] = {**raw.get("run", {}), **kw}
        return replace(self, ensemble=ens, raw=raw)

    def echo(self):
        return self.raw


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key: {key}" + (f" (in [{where}])" if where else ""))
    return table[key]


def parse_config(data: dict, source: str = "") -> ExperimentConfig:
    """Validate a parsed TOML document; errors raise :class:`ConfigError`."""
    for name in ("geometry", "bundle", "run"):
        if name not in data:
            raise ConfigError(f"missing table: [{name}]")
    g = data["geometry"]
    try:
        geom = make_geometry(_require(g, "id", "geometry"), g.get("dimension"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"[geometry]: {exc}") from exc
    b = data["bundle"]
    options = {k: v for k, v in b.items() if k != "id"}
    generic = data.get("generic", b.get("generic"))
    if generic is not None:
        options["generic"] = generic
    try:
        bundle = make_bundle(geom, _require(b, "id", "bundle"), **options)
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"[bundle]: {exc}") from exc
    r = data["run"]
    dt = _require(r, "dt", "")
    paths = _require(r, "paths", "")
    allowed = {"dt", "paths", "seed", "scheme", "threads", "batches", "max_steps"}
    unknown = set(r) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [run]: {', '.join(sorted(unknown))}")
    try:
        ens = EnsembleConfig(paths=int(paths), dt=float(dt), scheme=r.get("scheme", "onestep-exact"),
                             seed=int(r.get("seed", 0)), threads=int(r.get("threads", os.cpu_count() or 1)),
                             batches=int(r.get("batches", 32)), max_steps=int(r.get("max_steps", 10_000_000)))
        ens.step_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[run]: {exc}") from exc
    exp = dict(data.get("experiment", {}))
    quantity = exp.get("quantity", "semigroup")
    if quantity not in QUANTITIES:
        raise ConfigError(f"[experiment] quantity must be one of {QUANTITIES}, got {quantity!r}")
    return ExperimentConfig(geom, bundle, ens, exp, data, source)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, str(path))
