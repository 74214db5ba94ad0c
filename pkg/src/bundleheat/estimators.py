"""Monte Carlo estimators built on path ensembles.

Every estimator returns values with batch-means standard errors: the paths
are split into ``batches`` contiguous groups (default 32), the quantity is
computed per group, and the error is the standard deviation of the group
values divided by ``sqrt(batches)``.

Sections are evaluated in the reference frame of the geometry.  The value
carried back to the starting point ``x`` by one path is
``M_t T_t phi(X_t)`` with ``T_t = transport(E_t^T R(X_t))``, which is
expressed in the reference frame at ``x``.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import simpson

from . import kernels
from .bundles import BundleModel, SectionField, scalar_bundle
from .errors import ConfigError, NonCompliantSectionError
from .geometry import HalfSpace, Hemisphere2D, ModelGeometry
from .oracle import QuadratureGrid, chart_quadrature, halfspace_kernel, hemisphere_kernel, images_kernel
from .sde import EnsembleResult, PathBatch, StepConfig, run_ensemble

#: Share of the mean carried by the top 1% of samples that triggers the heavy-tail warning.
HEAVY_TAIL_SHARE = 0.2


@dataclass(frozen=True)
class EnsembleConfig:
    """Path count, time step, scheme, seed, worker threads and batch count."""

    paths: int = 100_000
    dt: float = 1e-3
    scheme: str = "onestep-exact"
    seed: int = 0
    threads: int = 1
    batches: int = 32
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.paths < 2 * self.batches:
            raise ConfigError(f"need at least {2 * self.batches} paths for {self.batches} batches")
        if self.batches < 2:
            raise ConfigError("need at least two batches")

    def step_config(self) -> StepConfig:
        return StepConfig(self.dt, self.scheme, self.seed, self.max_steps)

    def describe(self):
        return asdict(self)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "describe"):
        return obj.describe()
    return repr(obj)


def fingerprint(**inputs) -> str:
    """Stable sha256 of all inputs of an estimate."""
    blob = json.dumps(inputs, sort_keys=True, default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Estimate:
    """Monte Carlo value with its standard error, sample count and config fingerprint."""

    value: np.ndarray | float
    se: np.ndarray | float
    n: int
    fingerprint: str = ""
    extra: dict = field(default_factory=dict)

    def within(self, target, k=3.0, rel=0.0, atol=1e-12) -> bool:
        """``|value - target| <= max(k se, rel |target|, atol)`` elementwise."""
        tol = np.maximum(np.maximum(k * np.asarray(self.se), rel * np.abs(target)), atol)
        return bool(np.all(np.abs(np.asarray(self.value) - target) <= tol))

    def as_dict(self):
        return {"value": _jsonable(np.asarray(self.value)), "se": _jsonable(np.asarray(self.se)), "n": self.n,
                "fingerprint": self.fingerprint, **{k: _jsonable(v) if isinstance(v, np.ndarray) else v
                                                    for k, v in self.extra.items()}}


def batch_ids(n, batches):
    """Contiguous batch index of each of ``n`` samples."""
    return (np.arange(n) * batches) // n


def batch_means(samples, batches=32):
    """Mean over the leading axis and its batch-means standard error."""
    samples = np.asarray(samples, dtype=float)
    ids = batch_ids(len(samples), batches)
    counts = np.bincount(ids, minlength=batches).reshape((batches,) + (1,) * (samples.ndim - 1))
    sums = np.zeros((batches,) + samples.shape[1:])
    np.add.at(sums, ids, samples)
    means = sums / counts
    return samples.mean(axis=0), means.std(axis=0, ddof=1) / math.sqrt(batches)


def _batched_functional(batch_values, fn, full_value=None):
    vals = np.array([fn(v) for v in batch_values])
    B = len(vals)
    value = fn(np.mean(batch_values, axis=0)) if full_value is None else full_value
    return value, vals.std(axis=0, ddof=1) / math.sqrt(B)


def transport_weights(batch: PathBatch, geom: ModelGeometry, bundle: BundleModel):
    """``M_t T_t`` for every path: maps reference-frame values at ``X_t`` to the start frame."""
    A = np.einsum("pai,paj->pij", batch.frame, geom.reference_frame(batch.x))
    return batch.M @ bundle.transport(A)


def _simulate(x0, t, bundle, cfg: EnsembleConfig, record_times=(), n_paths=None):
    return run_ensemble(x0, t, bundle.geometry, bundle, cfg.step_config(), n_paths=n_paths,
                        threads=cfg.threads, record_times=record_times)


def _require(section: SectionField, what="section"):
    if not section.compliant:
        raise NonCompliantSectionError(f"{what} {section.name!r} violates the boundary condition")


# ---------------------------------------------------------------- semigroup


def semigroup_apply(phi: SectionField, x, t, bundle: BundleModel, cfg: EnsembleConfig, result=None) -> Estimate:
    """``(e^{-t Delta/2} phi)(x)`` as an ``N``-vector in the reference frame at ``x``."""
    _require(phi)
    geom = bundle.geometry
    if result is None:
        result = _simulate(np.asarray(x, float), t, bundle, cfg, n_paths=cfg.paths)
    batch = result.batch
    vals = np.einsum("pij,pj->pi", transport_weights(batch, geom, bundle), phi(batch.x))
    mean, se = batch_means(vals, cfg.batches)
    fp = fingerprint(op="semigroup_apply", phi=phi, x=np.asarray(x), t=t, bundle=bundle, cfg=cfg)
    return Estimate(mean, se, len(vals), fp)


# ---------------------------------------------------------------- histograms


def _bin_index(geom, x, edges):
    q = geom.to_chart(x)
    shape = tuple(len(e) - 1 for e in edges)
    idx = np.zeros(len(x), dtype=np.int64)
    inside = np.ones(len(x), dtype=bool)
    for a, e in enumerate(edges):
        k = np.searchsorted(e, q[:, a], side="right") - 1
        k = np.where(q[:, a] == e[-1], len(e) - 2, k)  # closed last edge
        inside &= (k >= 0) & (k < len(e) - 1)
        idx = idx * shape[a] + np.clip(k, 0, len(e) - 2)
    return np.where(inside, idx, -1)


def _cell_volumes(geom, edges):
    lo = np.meshgrid(*[e[:-1] for e in edges], indexing="ij")
    hi = np.meshgrid(*[e[1:] for e in edges], indexing="ij")
    return geom.chart_cell_volume(np.stack(lo, -1), np.stack(hi, -1))


@dataclass
class KernelHistogram:
    """Bin-averaged kernel estimate on a chart window.

    ``value[..., i, j]`` is the bin average of the kernel matrix (``NaN`` for
    bins no path reached), ``batch_values`` the same per batch.
    """

    edges: list
    value: np.ndarray
    se: np.ndarray
    counts: np.ndarray
    volumes: np.ndarray
    batch_values: np.ndarray
    n_paths: int
    fingerprint: str = ""

    @property
    def shape(self):
        return self.counts.shape

    def centers(self):
        return [0.5 * (e[1:] + e[:-1]) for e in self.edges]

    def mass(self) -> Estimate:
        """Integral of the (trace-normalised) kernel over the window."""
        N = self.value.shape[-1]

        def total(v):
            tr = np.trace(np.nan_to_num(v), axis1=-2, axis2=-1) / N
            return float(np.sum(tr * self.volumes))

        value, se = _batched_functional(self.batch_values, total, total(self.value))
        return Estimate(value, se, self.n_paths, self.fingerprint)

    def norm(self) -> Estimate:
        """Spectral norm of every bin matrix."""

        def norms(v):
            return np.linalg.norm(np.nan_to_num(v), ord=2, axis=(-2, -1))

        value, se = _batched_functional(self.batch_values, norms, norms(self.value))
        value = np.where(self.counts > 0, value, np.nan)
        return Estimate(value, np.where(self.counts > 0, se, np.nan), self.n_paths, self.fingerprint)


def _histogram(geom, x_end, weights, edges, batches, n_norm):
    """Per-batch bin sums of ``weights`` (P, K) divided by ``n_norm / batches`` and the cell volume."""
    P = len(x_end)
    K = weights.shape[1]
    shape = tuple(len(e) - 1 for e in edges)
    nb = int(np.prod(shape))
    idx = _bin_index(geom, x_end, edges)
    bid = batch_ids(P, batches)
    full = np.where(idx >= 0, bid * nb + idx, -1)
    sums = kernels.bin_accumulate(full, weights, batches * nb).reshape((batches,) + shape + (K,))
    counts = np.bincount(idx[idx >= 0], minlength=nb).reshape(shape)
    vol = _cell_volumes(geom, edges)
    per_batch = np.bincount(bid, minlength=batches).astype(float)
    scale = (np.asarray(n_norm, float) / P) * per_batch
    dens = sums / (scale.reshape((batches,) + (1,) * (len(shape) + 1)) * vol[..., None])
    leak = 1.0 - np.count_nonzero(idx >= 0) / P
    return dens, counts, vol, leak


def kernel_estimate(x, t, window, bins, bundle: BundleModel, cfg: EnsembleConfig, result=None,
                    snapshot=None) -> KernelHistogram:
    """Histogram estimate of ``K(t; x, .)`` on the chart box ``window = (lo, hi)`` with ``bins`` cells per axis."""
    geom = bundle.geometry
    lo, hi = (np.asarray(w, float) for w in window)
    if np.any(hi <= lo):
        raise ValueError("empty window")
    edges = [np.linspace(a, b, int(m) + 1) for a, b, m in zip(lo, hi, np.broadcast_to(bins, lo.shape))]
    if result is None:
        result = _simulate(np.asarray(x, float), t, bundle, cfg, n_paths=cfg.paths)
    batch = result.batch if snapshot is None else result.snapshots[snapshot]
    N = bundle.rank
    w = transport_weights(batch, geom, bundle).reshape(len(batch), N * N)
    dens, counts, vol, _ = _histogram(geom, batch.x, w, edges, cfg.batches, len(batch))
    dens = dens.reshape(dens.shape[:-1] + (N, N))
    value = dens.mean(axis=0)
    se = dens.std(axis=0, ddof=1) / math.sqrt(cfg.batches)
    empty = counts == 0
    value[empty] = np.nan
    se[empty] = np.nan
    fp = fingerprint(op="kernel_estimate", x=np.asarray(x), t=t, window=[lo, hi], bins=bins, bundle=bundle, cfg=cfg)
    return KernelHistogram(edges, value, se, counts, vol, dens, len(batch), fp)


# ---------------------------------------------------------------- stratified starts


class Stratified(NamedTuple):
    starts: np.ndarray
    node: np.ndarray
    weight: np.ndarray
    batch: np.ndarray


def stratify(grid: QuadratureGrid, keep, n_paths, batches) -> Stratified:
    """Assign path ``i`` to node ``i mod Q`` of the kept nodes.

    ``weight[i] = w_q / n_{q,b}`` with ``n_{q,b}`` the number of paths of
    batch ``b`` at node ``q``, so the weighted sum over one batch is an
    unbiased quadrature of the node function.
    """
    nodes = np.flatnonzero(keep)
    Q = len(nodes)
    if Q == 0:
        raise ValueError("no quadrature nodes inside the support")
    if n_paths // batches < Q:
        raise ConfigError(f"{Q} quadrature nodes need at least {Q * batches} paths ({batches} batches)")
    node = nodes[np.arange(n_paths) % Q]
    bid = batch_ids(n_paths, batches)
    counts = np.zeros((batches, len(grid)))
    np.add.at(counts, (bid, node), 1.0)
    weight = grid.weights[node] / counts[bid, node]
    return Stratified(grid.points[node], node, weight, bid)


def _batch_sums(values, strat: Stratified, batches):
    sums = np.zeros((batches,) + values.shape[1:])
    np.add.at(sums, strat.batch, strat.weight.reshape((-1,) + (1,) * (values.ndim - 1)) * values)
    return sums


# ---------------------------------------------------------------- conservation


def conservation_pairing(phi: SectionField, eta: SectionField, t, grid: QuadratureGrid, bundle: BundleModel,
                         cfg: EnsembleConfig, control=False, times=None) -> Estimate | list:
    """``(e^{-t Delta/2} phi, eta) - (phi, eta)``, evaluated as ``(phi, e^{-t Delta/2} eta) - (phi, eta)``.

    ``eta`` must be a closed-form bounded harmonic section; a non-compliant
    ``eta`` is refused unless ``control=True`` (negative control).  With
    ``times`` a list of estimates, one per time, is returned from one run.
    """
    _require(phi, "test section")
    if eta.harmonic is None:
        raise ValueError(f"{eta.name!r} is not in the closed-form harmonic catalogue")
    if not eta.compliant and not control:
        raise NonCompliantSectionError(f"{eta.name!r} violates the boundary condition; pass control=True")
    geom = bundle.geometry
    phi_nodes = phi(grid.points)
    strat = stratify(grid, np.any(phi_nodes != 0, axis=1), cfg.paths, cfg.batches)
    times_list = [t] if times is None else sorted(times)
    result = _simulate(strat.starts, max(times_list), bundle, cfg, record_times=times_list)
    f0 = phi_nodes[strat.node]
    eta0 = eta(strat.starts)
    out = []
    for tau in times_list:
        batch = result.snapshots[tau]
        carried = np.einsum("pij,pj->pi", transport_weights(batch, geom, bundle), eta(batch.x))
        per_path = np.sum(f0 * (carried - eta0), axis=1)
        sums = _batch_sums(per_path, strat, cfg.batches)
        fp = fingerprint(op="conservation_pairing", phi=phi, eta=eta.name, t=tau, bundle=bundle, cfg=cfg)
        out.append(Estimate(float(sums.mean()), float(sums.std(ddof=1) / math.sqrt(cfg.batches)), cfg.paths, fp,
                            {"t": tau, "control": bool(control)}))
    return out[0] if times is None else out


# ---------------------------------------------------------------- local time


def local_time_moments(x, times, p, kappa_lower, geom: ModelGeometry, cfg: EnsembleConfig) -> list:
    """``E_x[exp(-p kappa_lower lam_t)]`` for each ``t`` in ``times`` (one simulation)."""
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    if kappa_lower > 0:
        raise ValueError("kappa_lower must be <= 0")
    times = sorted(times)
    result = _simulate(np.asarray(x, float), times[-1], scalar_bundle(geom), cfg, record_times=times,
                       n_paths=cfg.paths)
    out = []
    for t in times:
        samples = np.exp(-p * kappa_lower * result.snapshots[t].lam)
        mean, se = batch_means(samples, cfg.batches)
        top = np.sort(samples)[-max(1, len(samples) // 100):]
        share = float(top.sum() / samples.sum())
        if share > HEAVY_TAIL_SHARE:
            warnings.warn(f"heavy tail at t={t}: top 1% of samples carry {share:.0%} of the mean", RuntimeWarning,
                          stacklevel=2)
        fp = fingerprint(op="local_time_moment", x=np.asarray(x), t=t, p=p, kappa=kappa_lower, geom=geom, cfg=cfg)
        out.append(Estimate(float(mean), float(se), len(samples), fp, {"t": t, "tail_share": share}))
    return out


def local_time_moment(x, t, p, kappa_lower, geom: ModelGeometry, cfg: EnsembleConfig) -> Estimate:
    return local_time_moments(x, [t], p, kappa_lower, geom, cfg)[0]


class ExpFit(NamedTuple):
    """``log y = log K1 + K2 t`` by weighted least squares."""

    K1: float
    K2: float
    K1_se: float
    K2_se: float


def fit_exponential(times, values, ses) -> ExpFit:
    t = np.asarray(times, float)
    y = np.log(np.asarray(values, float))
    s = np.asarray(ses, float) / np.asarray(values, float)
    w = 1.0 / np.maximum(s, 1e-15) ** 2
    A = np.stack([np.ones_like(t), t], axis=1)
    cov = np.linalg.inv(A.T @ (w[:, None] * A))
    beta = cov @ (A.T @ (w * y))
    logk1, k2 = beta
    return ExpFit(math.exp(logk1), float(k2), math.exp(logk1) * math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1]))


# ---------------------------------------------------------------- domination


def default_k0(geom: ModelGeometry):
    """Scalar Neumann kernel ``K0(t, x, y)`` for the geometry, if known in closed form."""
    if isinstance(geom, HalfSpace):
        return lambda t, x, y: halfspace_kernel(t, x, y, "neumann")
    if isinstance(geom, Hemisphere2D):
        return lambda t, x, y: hemisphere_kernel(t, x, y, "neumann")
    raise ValueError(f"no closed-form scalar kernel for {geom!r}")


def bin_average(kernel, t, x, geom, lo, hi, nodes=24):
    """Volume average of ``kernel(t, x, .)`` over the chart box ``[lo, hi]``."""
    quad = chart_quadrature(geom, lo, hi, [nodes] * len(lo))
    vals = kernel(t, np.asarray(x, float)[None, :], quad.points)
    return float(np.sum(quad.weights * vals) / np.sum(quad.weights))


@dataclass
class DominationRow:
    y: list
    t: float
    norm: float
    norm_se: float
    k0: float
    ratio: float
    ratio_se: float
    bound: float
    ok: bool


def domination_report(x, windows, times, bundle: BundleModel, cfg: EnsembleConfig, k0=None) -> list:
    """Bin-averaged ``||K_{W,S}(t; x, y)||`` against the scalar kernel on each chart window.

    ``windows`` is a list of chart boxes ``(lo, hi)``.  When ``c2 == 0`` the
    row asserts ``ratio <= exp(-c1 t / 2) (1 + 3 rel_se)``.
    """
    geom = bundle.geometry
    k0 = default_k0(geom) if k0 is None else k0
    times = sorted(times)
    result = _simulate(np.asarray(x, float), times[-1], bundle, cfg, record_times=times, n_paths=cfg.paths)
    rows = []
    for t in times:
        snap = result.snapshots[t]
        N = bundle.rank
        w = transport_weights(snap, geom, bundle).reshape(len(snap), N * N)
        for lo, hi in windows:
            lo, hi = np.asarray(lo, float), np.asarray(hi, float)
            edges = [np.array([a, b]) for a, b in zip(lo, hi)]
            dens, counts, _, _ = _histogram(geom, snap.x, w, edges, cfg.batches, len(snap))
            mats = dens.reshape(cfg.batches, N, N)

            def norm(m):
                return float(np.linalg.norm(m, 2))

            value, se = _batched_functional(mats, norm)
            ref = bin_average(k0, t, x, geom, lo, hi)
            ratio, rse = value / ref, se / ref
            bound = math.exp(-0.5 * bundle.c1 * t) if bundle.c2 == 0 else math.nan
            ok = bool(np.isnan(bound) or ratio <= bound * (1 + 3 * rse / max(ratio, 1e-300)))
            centre = geom.from_chart(0.5 * (lo + hi)).tolist()
            rows.append(DominationRow(centre, t, value, se, ref, ratio, rse, bound, ok))
    return rows


class DominationFit(NamedTuple):
    C1: float
    C2: float
    C2_se: float


def fit_domination(rows) -> DominationFit:
    """``C2`` = slope of ``log ratio`` in ``t``; ``C1`` = envelope of ``(ratio + 3 se) exp(-C2 t)``."""
    t = np.array([r.t for r in rows])
    ratio = np.array([r.ratio for r in rows])
    se = np.array([r.ratio_se for r in rows])
    fit = fit_exponential(t, ratio, se)
    C1 = float(np.max((ratio + 3 * se) * np.exp(-fit.K2 * t)))
    return DominationFit(C1, fit.K2, fit.K2_se)


# ---------------------------------------------------------------- L1 growth


def l1_norm(phi: SectionField, grid: QuadratureGrid) -> float:
    return float(np.sum(grid.weights * np.linalg.norm(phi(grid.points), axis=1)))


def l1_growth(phi: SectionField, t, start_grid: QuadratureGrid, window, bins, bundle: BundleModel,
              cfg: EnsembleConfig, times=None) -> Estimate | list:
    """``||e^{-t Delta/2} phi||_{L1}`` on a chart window.

    Paths start on the nodes of ``start_grid`` (covering ``supp phi``) and
    carry ``(M_t T_t)^T phi(y) w_y`` to their endpoints, which by symmetry
    of the kernel gives a histogram of the evolved section; its norm is
    summed over the window cells.
    """
    _require(phi)
    geom = bundle.geometry
    phi_nodes = phi(start_grid.points)
    strat = stratify(start_grid, np.any(phi_nodes != 0, axis=1), cfg.paths, cfg.batches)
    times_list = [t] if times is None else sorted(times)
    result = _simulate(strat.starts, max(times_list), bundle, cfg, record_times=times_list)
    lo, hi = (np.asarray(w, float) for w in window)
    edges = [np.linspace(a, b, int(m) + 1) for a, b, m in zip(lo, hi, np.broadcast_to(bins, lo.shape))]
    nb = tuple(len(e) - 1 for e in edges)
    vol = _cell_volumes(geom, edges)
    out = []
    for tau in times_list:
        snap = result.snapshots[tau]
        carried = np.einsum("pji,pj->pi", transport_weights(snap, geom, bundle), phi_nodes[strat.node])
        w = carried * strat.weight[:, None]
        idx = _bin_index(geom, snap.x, edges)
        full = np.where(idx >= 0, strat.batch * int(np.prod(nb)) + idx, -1)
        sums = kernels.bin_accumulate(full, w, cfg.batches * int(np.prod(nb))).reshape((cfg.batches,) + nb + (-1,))
        per_batch = np.linalg.norm(sums, axis=-1).reshape(cfg.batches, -1).sum(axis=1)
        inside = np.linalg.norm(w[idx >= 0], axis=1).sum()
        leak = 1.0 - inside / max(np.linalg.norm(w, axis=1).sum(), 1e-300)
        if leak > 1e-3:
            warnings.warn(f"l1_growth window misses {leak:.2%} of the carried weight at t={tau}", RuntimeWarning,
                          stacklevel=2)
        fp = fingerprint(op="l1_growth", phi=phi, t=tau, window=[lo, hi], bins=bins, bundle=bundle, cfg=cfg)
        out.append(Estimate(float(per_batch.mean()), float(per_batch.std(ddof=1) / math.sqrt(cfg.batches)),
                            cfg.paths, fp, {"t": tau, "leak": leak, "cells": int(np.prod(nb)), "volume": float(vol.sum())}))
    return out[0] if times is None else out


def l1_bound_holds(est: Estimate, fit: DominationFit, t, l1_phi, k=3.0) -> bool:
    """``value - k se <= C1 exp(C2 t) ||phi||_1`` (with 1e-9 relative slack for exact equality)."""
    return bool(est.value - k * est.se <= fit.C1 * math.exp(fit.C2 * t) * l1_phi * (1 + 1e-9))


# ---------------------------------------------------------------- integral identity


def neumann_laplacian_1d(xi, h=1e-3):
    """Discrete ``-xi''`` on the half-line with even reflection at 0 (second-order differences)."""

    def lap(x):
        x = np.asarray(x, float)
        return -(xi(x + h) - 2.0 * xi(x) + xi(np.abs(x - h))) / h ** 2

    return lap


def intident_check(phi, xi, t, grid: QuadratureGrid, cfg: EnsembleConfig, n_tau=21) -> Estimate:
    """Residual of ``(P_t phi - phi, xi) + (1/2) int_0^t (P_tau phi, Delta xi) dtau`` on the half-line.

    ``phi`` and ``xi`` are scalar functions of ``(P, 1)`` points; ``xi`` must
    satisfy the Neumann condition.  Both sides are estimated from the same
    paths (started on ``grid``), the time integral by Simpson's rule on
    ``n_tau >= 21`` snapshot times.  ``extra`` holds the two sides and their
    images-kernel quadrature values.
    """
    geom = HalfSpace(1)
    if n_tau < 21 or n_tau % 2 == 0:
        raise ValueError("n_tau must be odd and >= 21")
    h = 1e-4
    if abs(float(xi(np.array([[h]]))[0] - xi(np.array([[0.0]]))[0])) / h > 1e-3:
        raise ValueError("xi is not in the Neumann domain (nonzero derivative at 0)")
    lap = neumann_laplacian_1d(lambda x: np.asarray(xi(np.reshape(x, (-1, 1))), float).ravel())
    taus = np.linspace(0.0, t, n_tau)
    f_nodes = np.asarray(phi(grid.points), float).ravel()
    strat = stratify(grid, f_nodes != 0, cfg.paths, cfg.batches)
    result = _simulate(strat.starts, t, scalar_bundle(geom), cfg, record_times=list(taus))
    f0 = f_nodes[strat.node]
    xi_end = np.asarray(xi(result.snapshots[taus[-1]].x), float).ravel()
    xi0 = np.asarray(xi(strat.starts), float).ravel()
    path_lap = np.stack([lap(result.snapshots[tau].x[:, 0]) for tau in taus], axis=1)
    rhs_path = -0.5 * simpson(path_lap, x=taus, axis=1)
    lhs = _batch_sums(f0 * (xi_end - xi0), strat, cfg.batches)
    rhs = _batch_sums(f0 * rhs_path, strat, cfg.batches)
    resid = lhs - rhs
    B = math.sqrt(cfg.batches)

    # deterministic sides by images quadrature on a fine grid
    fine = QuadratureGrid.box([0.0], [float(grid.points.max()) + 10 * math.sqrt(t) + 1], [4001])

    def evolve(tau):
        if tau == 0:
            return np.asarray(phi(fine.points), float).ravel()
        Kmat = images_kernel(tau, fine.points[:, 0][:, None], grid.points[:, 0][None, :])
        return Kmat @ (grid.weights * f_nodes)

    xi_fine = np.asarray(xi(fine.points), float).ravel()
    lap_fine = lap(fine.points[:, 0])
    lhs_o = float(np.sum(fine.weights * (evolve(t) - evolve(0)) * xi_fine))
    rhs_o = -0.5 * float(simpson([np.sum(fine.weights * evolve(tau) * lap_fine) for tau in taus], x=taus))
    fp = fingerprint(op="intident_check", t=t, n_tau=n_tau, cfg=cfg)
    return Estimate(float(resid.mean()), float(resid.std(ddof=1) / B), cfg.paths, fp,
                    {"lhs": float(lhs.mean()), "lhs_se": float(lhs.std(ddof=1) / B), "rhs": float(rhs.mean()),
                     "rhs_se": float(rhs.std(ddof=1) / B), "lhs_oracle": lhs_o, "rhs_oracle": rhs_o})


__all__ = [
    "EnsembleConfig", "Estimate", "KernelHistogram", "DominationRow", "DominationFit", "ExpFit", "QuadratureGrid",
    "batch_means", "fingerprint", "transport_weights", "semigroup_apply", "kernel_estimate", "stratify",
    "conservation_pairing", "local_time_moment", "local_time_moments", "fit_exponential", "domination_report",
    "fit_domination", "bin_average", "default_k0", "l1_norm", "l1_growth", "l1_bound_holds", "intident_check",
    "neumann_laplacian_1d", "EnsembleResult",
]
