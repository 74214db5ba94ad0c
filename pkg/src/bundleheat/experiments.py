"""Run the estimator named in an experiment config and collect a report."""
from __future__ import annotations

import math

import numpy as np

from . import estimators as est
from .bundles import bump_section, constant_section, harmonic_section
from .config import ExperimentConfig
from .errors import ConfigError
from .oracle import QuadratureGrid, chart_quadrature
from .report import Report, make_row


def _section(cfg: ExperimentConfig, spec, key="section"):
    if spec is None:
        raise ConfigError(f"missing key: {key} (in [experiment])")
    if isinstance(spec, str):
        return harmonic_section(cfg.bundle, spec)
    if "constant" in spec:
        return constant_section(cfg.bundle, spec["constant"])
    try:
        return bump_section(cfg.bundle, spec["center"], float(spec["radius"]), spec["components"])
    except KeyError as exc:
        raise ConfigError(f"missing key: {exc.args[0]} (in [experiment.{key}])") from exc


def _times(exp):
    t = exp.get("t", [1.0])
    return [float(v) for v in np.atleast_1d(t)]


def _points(exp, key="x"):
    if key not in exp:
        raise ConfigError(f"missing key: {key} (in [experiment])")
    return np.atleast_2d(np.asarray(exp[key], dtype=float))


def _grid(cfg, spec, key):
    if spec is None:
        raise ConfigError(f"missing key: {key} (in [experiment])")
    lo, hi, counts = spec["lo"], spec["hi"], spec["counts"]
    if spec.get("chart", False):
        return chart_quadrature(cfg.geometry, lo, hi, counts)
    return QuadratureGrid.box(lo, hi, counts, rule=spec.get("rule", "midpoint"))


def _window(exp):
    w = exp.get("window")
    if w is None:
        raise ConfigError("missing key: window (in [experiment])")
    return (w["lo"], w["hi"]), w["bins"]


def run_semigroup(cfg, report):
    phi = _section(cfg, cfg.experiment.get("section"))
    expect = cfg.experiment.get("expect")
    for k, x in enumerate(_points(cfg.experiment)):
        for t in _times(cfg.experiment):
            e = est.semigroup_apply(phi, x, t, cfg.bundle, cfg.ensemble)
            report.rows.append(make_row("semigroup", cfg, t, x, e))
            if expect is not None:
                target = np.asarray(expect, float).reshape(-1, cfg.bundle.rank)[k]
                for i, (v, s, g) in enumerate(zip(np.ravel(e.value), np.ravel(e.se), target)):
                    report.check(f"semigroup[{k}][{i}] t={t}", v, s, g, max(3 * s, 1e-12))


def run_kernel(cfg, report):
    window, bins = _window(cfg.experiment)
    times = _times(cfg.experiment)
    for x in _points(cfg.experiment):
        result = est.run_ensemble(x, max(times), cfg.geometry, cfg.bundle, cfg.ensemble.step_config(),
                                  n_paths=cfg.ensemble.paths, threads=cfg.ensemble.threads, record_times=times)
        for t in times:
            h = est.kernel_estimate(x, t, window, bins, cfg.bundle, cfg.ensemble, result=result, snapshot=t)
            mass = h.mass()
            report.rows.append(make_row("kernel_mass", cfg, t, x, mass))
            centers = np.meshgrid(*h.centers(), indexing="ij")
            cpts = np.stack([c.ravel() for c in centers], axis=-1)
            vals = h.value.reshape(len(cpts), -1)
            ses = h.se.reshape(len(cpts), -1)
            counts = h.counts.ravel()
            for c, v, s, n in zip(cpts, vals, ses, counts):
                report.rows.append(make_row("kernel", cfg, t, c, est.Estimate(v, s, int(n))))
            if cfg.bundle.c1 >= 0 and cfg.bundle.c2 >= 0:
                report.check(f"kernel mass <= 1 at t={t}", mass.value, mass.se, 1.0, 3 * mass.se,
                             passed=mass.value <= 1 + 3 * mass.se + 1e-12)


def run_conservation(cfg, report):
    exp = cfg.experiment
    phi = _section(cfg, exp.get("section"))
    eta = _section(cfg, exp.get("eta", "one"), "eta")
    control = bool(exp.get("control", False))
    grid = _grid(cfg, exp.get("grid"), "grid")
    times = _times(exp)
    for e in est.conservation_pairing(phi, eta, times[-1], grid, cfg.bundle, cfg.ensemble, control=control,
                                      times=times):
        t = e.extra["t"]
        report.rows.append(make_row("conservation", cfg, t, [], e))
        if control:
            report.check(f"control drift t={t}", e.value, e.se, 0.0, 5 * e.se, passed=abs(e.value) > 5 * e.se)
        else:
            report.check(f"conservation t={t}", e.value, e.se, 0.0, max(3 * e.se, 1e-12))


def run_domination(cfg, report):
    exp = cfg.experiment
    x = _points(exp)[0]
    windows = exp.get("windows")
    if not windows:
        raise ConfigError("missing key: windows (in [experiment])")
    rows = est.domination_report(x, [(w[0], w[1]) for w in windows], _times(exp), cfg.bundle, cfg.ensemble)
    for r in rows:
        e = est.Estimate(np.array([r.norm, r.k0, r.ratio]), np.array([r.norm_se, 0.0, r.ratio_se]), cfg.ensemble.paths)
        report.rows.append(make_row("domination", cfg, r.t, r.y, e))
        if not math.isnan(r.bound):
            report.check(f"domination y={np.round(r.y, 4).tolist()} t={r.t}", r.ratio, r.ratio_se, r.bound,
                         3 * r.ratio_se, passed=r.ok)
    fit = est.fit_domination(rows)
    report.fits["domination"] = fit._asdict()


def run_localtime(cfg, report):
    exp = cfg.experiment
    x = _points(exp)[0]
    p = float(exp.get("p", 1))
    kappa = float(exp.get("kappa_lower", min(0.0, cfg.geometry.witnesses().shape_lower)))
    ests = est.local_time_moments(x, _times(exp), p, kappa, cfg.geometry, cfg.ensemble)
    for e in ests:
        report.rows.append(make_row("localtime", cfg, e.extra["t"], x, e))
    if len(ests) >= 2:
        fit = est.fit_exponential([e.extra["t"] for e in ests], [e.value for e in ests], [e.se for e in ests])
        report.fits["localtime"] = fit._asdict()


def run_l1(cfg, report):
    exp = cfg.experiment
    phi = _section(cfg, exp.get("section"))
    grid = _grid(cfg, exp.get("grid"), "grid")
    window, bins = _window(exp)
    times = _times(exp)
    l1_phi = est.l1_norm(phi, grid)
    ests = est.l1_growth(phi, times[-1], grid, window, bins, cfg.bundle, cfg.ensemble, times=times)
    fit = None
    if "C1" in exp and "C2" in exp:
        fit = est.DominationFit(float(exp["C1"]), float(exp["C2"]), 0.0)
    for e in ests:
        t = e.extra["t"]
        report.rows.append(make_row("l1", cfg, t, [], e))
        if fit is not None:
            bound = fit.C1 * math.exp(fit.C2 * t) * l1_phi
            report.check(f"l1 bound t={t}", e.value, e.se, bound, 3 * e.se, passed=est.l1_bound_holds(e, fit, t, l1_phi))
    report.fits["l1_phi"] = l1_phi


RUNNERS = {
    "semigroup": run_semigroup,
    "kernel": run_kernel,
    "conservation": run_conservation,
    "domination": run_domination,
    "localtime": run_localtime,
    "l1": run_l1,
}


def run_experiment(cfg: ExperimentConfig, quantity: str | None = None) -> Report:
    quantity = quantity or cfg.quantity
    if quantity not in RUNNERS:
        raise ConfigError(f"unknown quantity {quantity!r}")
    report = Report(quantity, cfg.echo())
    try:
        RUNNERS[quantity](cfg, report)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"[experiment]: {exc}") from exc
    return report
