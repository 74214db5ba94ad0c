"""Reflected Brownian motion with frame transport, local time and the
multiplicative functional.

Conventions
-----------
* The generator of the motion is half the Laplacian; the driving Brownian
  increments ``db`` are frame coordinates of the step (anti-development).
* ``lam`` is the Skorokhod regulator of the normal collar coordinate
  ``r = r0 + B + lam``.  On the half-line started at 0 this gives
  ``E[lam_t] = sqrt(2 t / pi)``, and a Robin coefficient ``s`` enters the
  weight as ``exp(-s lam)``.
* The multiplicative matrix is updated by right multiplication,
  ``M <- M exp(-W dt / 2)`` every step (W at the start of the step) and
  ``M <- M exp(-S dlam) (I - Pi_-)`` on steps that touch the boundary.  The
  Dirichlet part is imposed as an exact projection.

Random streams
--------------
Paths are simulated in blocks of :data:`BLOCK_SIZE`.  Path ``i`` belongs to
block ``i // BLOCK_SIZE`` and block ``k`` draws from
``numpy.random.Generator(PCG64(SeedSequence(seed, spawn_key=(k,))))``: per
step first ``standard_normal((size, n))`` then ``random(size)``.  Results
therefore do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .bundles import BoundaryContext, BundleModel
from .errors import ConfigError
from .geometry import DiskExterior2D, HalfSpace, Hemisphere2D, ModelGeometry

SCHEMES = ("onestep-exact", "overshoot")
BLOCK_SIZE = 16384
#: Paths closer than this many ``sqrt(dt)`` to the boundary step in collar coordinates.
COLLAR_LAYER = 8.0


@dataclass(frozen=True)
class StepConfig:
    """Time step, local-time scheme, master seed and step budget."""

    dt: float
    scheme: str = "onestep-exact"
    seed: int = 0
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def exact(self) -> bool:
        return self.scheme == "onestep-exact"

    def check_geometry(self, geom: ModelGeometry):
        if geom.r0 < 1e6 and self.dt >= geom.r0 ** 2 / 4:
            raise ConfigError(f"dt={self.dt} too coarse for the collar of {geom!r} (need dt < {geom.r0 ** 2 / 4:.4g})")

    def n_steps(self, t: float) -> int:
        if t < 0:
            raise ConfigError("time must be nonnegative")
        n = int(math.ceil(t / self.dt - 1e-9))
        if n > self.max_steps:
            raise ConfigError(f"{n} steps needed for t={t} exceed max_steps={self.max_steps}")
        return n


@dataclass
class PathState:
    """A single path: position, frame, time, local time and multiplicative matrix."""

    x: np.ndarray
    frame: np.ndarray
    t: float
    lam: float
    M: np.ndarray
    alive: bool = True
    contacts: int = 0
    Minv: np.ndarray | None = None


@dataclass
class PathBatch:
    """Vectorised state of many paths (leading axis indexes paths)."""

    x: np.ndarray
    frame: np.ndarray
    t: float
    lam: np.ndarray
    M: np.ndarray
    alive: np.ndarray
    contacts: np.ndarray
    Minv: np.ndarray | None = None

    def __len__(self):
        return len(self.x)

    @classmethod
    def start(cls, geom, bundle, x0, n_paths=None, frame0=None, track_inverse=False):
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        if n_paths is not None and len(x0) == 1:
            x0 = np.repeat(x0, n_paths, axis=0)
        P = len(x0)
        if np.any(geom.normal_coordinate(x0) < -1e-9):
            raise ValueError("starting point outside the manifold")
        if frame0 is None:
            frames = geom.reference_frame(x0)
        else:
            frames = np.broadcast_to(np.asarray(frame0, float), (P, geom.ambient_dim, geom.dim)).copy()
        N = bundle.rank
        M = np.broadcast_to(np.eye(N), (P, N, N)).copy()
        return cls(x0.copy(), frames, 0.0, np.zeros(P), M, np.ones(P, bool), np.zeros(P, np.int64),
                   M.copy() if track_inverse else None)

    def path(self, i) -> PathState:
        return PathState(self.x[i].copy(), self.frame[i].copy(), self.t, float(self.lam[i]), self.M[i].copy(),
                         bool(self.alive[i]), int(self.contacts[i]),
                         None if self.Minv is None else self.Minv[i].copy())

    def copy(self):
        return PathBatch(self.x.copy(), self.frame.copy(), self.t, self.lam.copy(), self.M.copy(),
                         self.alive.copy(), self.contacts.copy(), None if self.Minv is None else self.Minv.copy())

    @classmethod
    def concatenate(cls, parts):
        first = parts[0]
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])  # noqa: E731
        return cls(cat("x"), cat("frame"), first.t, cat("lam"), cat("M"), cat("alive"), cat("contacts"),
                   None if first.Minv is None else cat("Minv"))


# ---------------------------------------------------------------- local time


def local_time_increment(r, db_normal, dt, scheme="onestep-exact", unif=None, rng=None):
    """Advance the normal coordinate over one step and return ``(r_new, dlam)``.

    ``overshoot`` inspects only the endpoint and projects it onto the
    boundary, crediting the overshoot to the local time.
    ``onestep-exact`` samples the pair from its exact one-step law using the
    minimum of the Brownian bridge (needs ``unif`` in (0, 1] or ``rng``).
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("normal coordinate must be nonnegative")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    b = np.broadcast_to(np.asarray(db_normal, dtype=float), r_arr.shape)
    exact = scheme == "onestep-exact"
    if exact and unif is None:
        if rng is None:
            raise ValueError("onestep-exact needs uniforms or a generator")
        unif = 1.0 - rng.random(r_arr.shape)
    u = np.ones(r_arr.shape) if unif is None else np.broadcast_to(np.asarray(unif, float), r_arr.shape)
    r_new, dlam = kernels.reflect_1d(r_arr.ravel(), b.ravel(), u.ravel(), float(dt), exact)
    if r_arr.ndim == 0:
        return float(r_new[0]), float(dlam[0])
    return r_new.reshape(r_arr.shape), dlam.reshape(r_arr.shape)


# ---------------------------------------------------------------- geometry moves


def _move_half_space(geom, x, E, db, unif, dt, exact):
    incr = np.einsum("pai,pi->pa", E, db)
    x_new = x + incr
    r_new, dlam = kernels.reflect_1d(x[:, -1], incr[:, -1], unif, dt, exact)
    x_new[:, -1] = r_new
    return x_new, E, dlam


def _move_disk(geom, x, E, db, unif, dt, exact):
    v = np.einsum("pai,pi->pa", E, db)
    x_new = x + v
    dlam = np.zeros(len(x))
    rho = np.hypot(x[:, 0], x[:, 1])
    layer = np.flatnonzero(rho - 1.0 < COLLAR_LAYER * math.sqrt(dt))
    if layer.size:
        xl, vl, rl = x[layer], v[layer], rho[layer]
        nu = xl / rl[:, None]
        bn = np.sum(vl * nu, axis=1) + dt / (2.0 * rl)
        bt = vl[:, 1] * nu[:, 0] - vl[:, 0] * nu[:, 1]
        r_new, dl = kernels.reflect_1d(rl - 1.0, bn, unif[layer], dt, exact)
        phi = np.arctan2(xl[:, 1], xl[:, 0]) + bt / rl
        x_new[layer] = (1.0 + r_new)[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        dlam[layer] = dl
    rho_new = np.hypot(x_new[:, 0], x_new[:, 1])
    stray = rho_new < 1.0
    if stray.any():  # interior step crossing the circle: mirror radially
        x_new[stray] *= ((2.0 - rho_new[stray]) / rho_new[stray])[:, None]
        dlam[stray] += 2.0 * (1.0 - rho_new[stray])
    return x_new, E, dlam


def _move_sphere(geom, x, E, db, unif, dt, exact):
    x_new, E_new = kernels.sphere_step(x, E, db)
    dlam = np.zeros(len(x))
    r = np.arcsin(np.clip(x[:, 2], -1.0, 1.0))
    layer = np.flatnonzero(r < COLLAR_LAYER * math.sqrt(dt))
    if layer.size:
        xl, El, rl = x[layer], E[layer], r[layer]
        v = np.einsum("pai,pi->pa", El, db[layer])
        bn = np.sum(v * geom.collar_normal(xl), axis=1) - 0.5 * np.tan(rl) * dt
        bt = np.sum(v * geom.collar_tangent(xl), axis=1)
        r_new, dl = kernels.reflect_1d(rl, bn, unif[layer], dt, exact)
        phi = np.arctan2(xl[:, 1], xl[:, 0]) + bt / np.cos(rl)
        c = np.cos(r_new)
        xn = np.stack([c * np.cos(phi), c * np.sin(phi), np.sin(r_new)], axis=1)
        x_new[layer] = xn
        E_new[layer] = kernels.sphere_transport(xl, xn, El)
        dlam[layer] = dl
    stray = np.flatnonzero(x_new[:, 2] < 0.0)
    if stray.size:  # interior step crossing the equator: mirror through it
        xs = x_new[stray].copy()
        dlam[stray] += -2.0 * np.arcsin(xs[:, 2])
        xs[:, 2] = -xs[:, 2]
        E_new[stray] = kernels.sphere_transport(x[stray], xs, E[stray])
        x_new[stray] = xs
    return x_new, E_new, dlam


def _mover(geom):
    if isinstance(geom, HalfSpace):
        return _move_half_space
    if isinstance(geom, DiskExterior2D):
        return _move_disk
    if isinstance(geom, Hemisphere2D):
        return _move_sphere
    raise TypeError(f"no path integrator for {geom!r}")


# ---------------------------------------------------------------- stepping


def advance(batch: PathBatch, geom: ModelGeometry, bundle: BundleModel, dt: float, exact: bool, rng) -> PathBatch:
    """Advance every path of ``batch`` by one step of length ``dt`` (in place)."""
    P = len(batch)
    db = rng.standard_normal((P, geom.dim)) * math.sqrt(dt)
    unif = 1.0 - rng.random(P)
    x_old, E_old = batch.x, batch.frame
    Wp = bundle.weitzenbock_propagator(x_old, E_old, dt)
    x_new, E_new, dlam = _mover(geom)(geom, x_old, E_old, db, unif, dt, exact)

    M = batch.M
    N = bundle.rank
    if Wp.ndim == 2 and not np.any(Wp - np.diag(np.diagonal(Wp))) and np.all(Wp.diagonal() == Wp[0, 0]):
        if Wp[0, 0] != 1.0:
            M = M * Wp[0, 0]
    else:
        M = M @ Wp
    hit = np.flatnonzero(dlam > 0.0)
    if hit.size and not bundle.params.get("trivial_boundary", False):
        ctx = BoundaryContext.from_frames(geom, x_new[hit], E_new[hit])
        M[hit] = M[hit] @ bundle.boundary_factor(ctx, dlam[hit])
    Minv = batch.Minv
    if Minv is not None:
        Minv = bundle.weitzenbock_propagator(x_old, E_old, dt, sign=1.0) @ Minv
        if hit.size:
            ctx = BoundaryContext.from_frames(geom, x_new[hit], E_new[hit])
            Minv[hit] = bundle.boundary_factor_inverse(ctx, dlam[hit]) @ Minv[hit]

    bad = ~(np.isfinite(x_new).all(axis=1) & np.isfinite(M).reshape(P, -1).all(axis=1))
    if bad.any():
        warnings.warn(f"non-finite state in {int(bad.sum())} path(s) at t={batch.t + dt:.6g}; aborting them",
                      RuntimeWarning, stacklevel=2)
    frozen = bad | ~batch.alive
    if frozen.any():
        keep = ~frozen
        x_new = np.where(keep[:, None], x_new, x_old)
        E_new = np.where(keep[:, None, None], E_new, E_old)
        M = np.where(keep[:, None, None], M, batch.M)
        dlam = np.where(keep, dlam, 0.0)
        batch.alive = batch.alive & ~bad
    batch.x, batch.frame, batch.M, batch.Minv = x_new, E_new, M, Minv
    batch.lam = batch.lam + dlam
    batch.contacts = batch.contacts + (dlam > 0.0)
    batch.t = batch.t + dt
    return batch


def step(state: PathState, geom: ModelGeometry, bundle: BundleModel, cfg: StepConfig, rng=None) -> PathState:
    """One step of a single path; returns a new state."""
    if not state.alive:
        raise ValueError("cannot step a dead path")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    batch = PathBatch(state.x[None].astype(float), state.frame[None].astype(float), state.t,
                      np.array([state.lam]), state.M[None].astype(float), np.array([True]),
                      np.array([state.contacts]), None if state.Minv is None else state.Minv[None].astype(float))
    return advance(batch, geom, bundle, cfg.dt, cfg.exact, rng).path(0)


def _block_rng(seed, block):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def simulate_path(x0, t, geom: ModelGeometry, bundle: BundleModel, cfg: StepConfig, frame0=None) -> PathState:
    """Simulate one path up to time ``t`` (same stream as path 0 of a one-path ensemble)."""
    cfg.check_geometry(geom)
    n_steps = cfg.n_steps(t)
    batch = PathBatch.start(geom, bundle, x0, frame0=frame0)
    if n_steps == 0:
        return batch.path(0)
    rng = _block_rng(cfg.seed, 0)
    dt = t / n_steps
    for _ in range(n_steps):
        advance(batch, geom, bundle, dt, cfg.exact, rng)
    return batch.path(0)


@dataclass
class EnsembleResult:
    """Terminal states (and optional snapshots) of an ensemble of paths."""

    batch: PathBatch
    x0: np.ndarray
    frame0: np.ndarray
    t: float
    dt: float
    n_steps: int
    snapshots: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return len(self.batch)


def run_ensemble(x0, t, geom: ModelGeometry, bundle: BundleModel, cfg: StepConfig, n_paths: int | None = None,
                 threads: int = 1, record_times=(), monitor=None, track_inverse=False, frame0=None,
                 block_size: int = BLOCK_SIZE) -> EnsembleResult:
    """Simulate ``n_paths`` paths from ``x0`` (one point or one point per path).

    ``record_times`` are snapshot times (rounded to the step grid);
    ``monitor(step_index, batch)`` is called after every step of every block.
    """
    cfg.check_geometry(geom)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if len(x0) == 1:
        if n_paths is None:
            raise ValueError("n_paths is required with a single starting point")
        x0 = np.repeat(x0, n_paths, axis=0)
    n_paths = len(x0)
    n_steps = cfg.n_steps(t)
    dt = t / n_steps if n_steps else cfg.dt
    record = {}
    for tau in record_times:
        k = int(round(tau / dt)) if n_steps else 0
        if k < 0 or k > n_steps or abs(k * dt - tau) > 1e-9 * max(1.0, t):
            raise ConfigError(f"snapshot time {tau} is not on the step grid (dt={dt})")
        record[k] = tau

    starts = list(range(0, n_paths, block_size))

    def run_block(b):
        lo = starts[b]
        batch = PathBatch.start(geom, bundle, x0[lo : lo + block_size], frame0=frame0, track_inverse=track_inverse)
        rng = _block_rng(cfg.seed, b)
        snaps = {}
        if 0 in record:
            snaps[record[0]] = batch.copy()
        for k in range(1, n_steps + 1):
            advance(batch, geom, bundle, dt, cfg.exact, rng)
            if monitor is not None:
                monitor(k, batch)
            if k in record:
                snaps[record[k]] = batch.copy()
        return batch, snaps

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_block, range(len(starts))))
    else:
        results = [run_block(b) for b in range(len(starts))]
    batch = PathBatch.concatenate([r[0] for r in results])
    snapshots = {tau: PathBatch.concatenate([r[1][tau] for r in results]) for tau in record.values()}
    frames0 = geom.reference_frame(x0) if frame0 is None else np.broadcast_to(frame0, (n_paths,) + np.shape(frame0)[-2:])
    return EnsembleResult(batch, x0, np.asarray(frames0), t, dt, n_steps, snapshots)


def with_dt(cfg: StepConfig, dt: float) -> StepConfig:
    return replace(cfg, dt=dt)
