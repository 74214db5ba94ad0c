"""Deterministic reference values.

Method-of-images kernels on half-spaces, the spherical-harmonic series on
the hemisphere, Crank-Nicolson solvers for the Robin problem on the
half-line and for the radial problem outside the unit disk, and grid
quadrature of the quadratic form of a bundle Laplacian.  Every kernel is
for the generator ``Delta / 2`` (unit diffusivity Brownian motion).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import legendre
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import erf, erfcx

from .bundles import BoundaryContext, BundleModel, _subsets
from .errors import NonCompliantSectionError, OracleConvergenceError
from .geometry import HalfSpace, ModelGeometry

#: Minimal empirical order accepted by the grid-doubling check.
MIN_ORDER = 1.9
_BCS = ("neumann", "dirichlet")


def _check_bc(bc):
    bc = bc.lower()
    if bc not in _BCS:
        raise ValueError(f"boundary condition must be one of {_BCS}, got {bc!r}")
    return bc


def _check_t(t):
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")


# ---------------------------------------------------------------- half-spaces


def gaussian_kernel(t, z):
    """Free heat kernel ``(2 pi t)^{-d/2} exp(-|z|^2 / 2t)`` for displacements ``z`` of shape (..., d)."""
    _check_t(t)
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    return np.exp(-np.sum(z * z, axis=-1) / (2 * t)) / (2 * np.pi * t) ** (d / 2)


def images_kernel(t, x, y, bc="neumann"):
    """Half-line kernel ``(2 pi t)^{-1/2} (exp(-(x-y)^2/2t) +- exp(-(x+y)^2/2t))``."""
    _check_t(t)
    bc = _check_bc(bc)
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("images_kernel needs nonnegative points")
    s = 1.0 if bc == "neumann" else -1.0
    c = 1.0 / math.sqrt(2 * np.pi * t)
    return c * (np.exp(-((x - y) ** 2) / (2 * t)) + s * np.exp(-((x + y) ** 2) / (2 * t)))


def halfspace_kernel(t, x, y, bc="neumann"):
    """Scalar kernel on ``{x_n >= 0}``: free Gaussian along the boundary times the images factor."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    tang = gaussian_kernel(t, x[..., :-1] - y[..., :-1]) if x.shape[-1] > 1 else 1.0
    return tang * images_kernel(t, x[..., -1], y[..., -1], bc)


def halfspace_forms_kernel(t, x, y, p=1, n=2):
    """Kernel of ``p``-forms on the flat half-space with absolute conditions.

    Diagonal in the basis ``dx_I``: the entry is the Dirichlet kernel when
    ``dx_n`` occurs in ``dx_I`` and the Neumann kernel otherwise.
    """
    if not 0 <= p <= n:
        raise ValueError(f"unsupported form degree p={p} in dimension n={n}")
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.shape[-1] != n or y.shape[-1] != n:
        raise ValueError(f"points must have {n} coordinates")
    kn = halfspace_kernel(t, x, y, "neumann")
    kd = halfspace_kernel(t, x, y, "dirichlet")
    basis = _subsets(n, p)
    diag = np.stack([np.asarray(kd if (n - 1) in I else kn) for I in basis], axis=-1)
    return diag[..., :, None] * np.eye(len(basis))


def halfspace_forms_mass(t, x, p=1, n=2):
    """Integral over ``y`` of each diagonal entry of :func:`halfspace_forms_kernel`."""
    _check_t(t)
    x = np.asarray(x, float)
    dmass = erf(x[..., -1] / math.sqrt(2 * t))
    return np.stack([np.asarray(dmass if (n - 1) in I else np.ones_like(dmass)) for I in _subsets(n, p)], axis=-1)


def halfline_robin_expectation(x, t, sigma):
    """``E_x[exp(-sigma lam_t)]`` for reflected motion on the half-line (closed form)."""
    _check_t(t)
    x = np.asarray(x, float)
    s = math.sqrt(2 * t)
    z = (x + sigma * t) / s
    # exp(sigma x + sigma^2 t / 2) erfc(z) written with erfcx for stability
    return erf(x / s) + np.exp(-(x * x) / (2 * t)) * erfcx(z)


# ---------------------------------------------------------------- hemisphere


def _sphere_series_coeffs(t, tol=1e-8):
    if t < 0.01:
        raise ValueError("hemisphere_kernel needs t >= 0.01 for its truncation budget")
    lmax = 8
    while True:
        ell = np.arange(lmax + 1)
        terms = (2 * ell + 1) / (4 * np.pi) * np.exp(-ell * (ell + 1) * t / 2)
        if terms[-1] < tol * 1e-3:
            break
        lmax *= 2
    tail = np.cumsum(terms[::-1])[::-1]  # tail[L] = sum_{l >= L}
    keep = int(np.argmax(tail < tol))
    return terms[:keep]


def sphere_kernel(t, cos_angle):
    """Heat kernel of the unit 2-sphere as a function of the cosine of the distance."""
    _check_t(t)
    return legendre.legval(np.clip(cos_angle, -1.0, 1.0), _sphere_series_coeffs(t))


def hemisphere_kernel(t, x, y, bc="neumann"):
    """Kernel of the closed upper hemisphere with Neumann (or Dirichlet) condition at the equator.

    ``x`` and ``y`` are unit vectors in R^3.  The series is truncated where
    its tail is below 1e-8.
    """
    bc = _check_bc(bc)
    x, y = np.asarray(x, float), np.asarray(y, float)
    y_img = y * np.array([1.0, 1.0, -1.0])
    s = 1.0 if bc == "neumann" else -1.0
    coeffs = _sphere_series_coeffs(t)
    c1 = np.clip(np.sum(x * y, axis=-1), -1, 1)
    c2 = np.clip(np.sum(x * y_img, axis=-1), -1, 1)
    return legendre.legval(c1, coeffs) + s * legendre.legval(c2, coeffs)


# ---------------------------------------------------------------- Crank-Nicolson


class PDESolution(NamedTuple):
    """Solution on the finest grid with grid-doubling diagnostics."""

    grid: np.ndarray
    values: np.ndarray
    order: float
    error: float

    def at(self, x):
        return CubicSpline(self.grid, self.values)(np.asarray(x, float))


def _cn_robin(x0, L, h, t, sigma, drift, u0, far, ratio, startup=4):
    """Crank-Nicolson for ``u_t = (u'' + drift(r) u') / 2`` on ``[x0, L]``.

    ``u'(x0) = sigma u(x0)`` through a ghost node and ``u(L) = far``.
    Rannacher start-up: ``startup`` implicit Euler half-steps.
    """
    J = int(round((L - x0) / h))
    r = x0 + h * np.arange(J + 1)
    a = drift(r[:-1])
    lower = 0.5 * (1.0 / h ** 2 - a / (2 * h))
    upper = 0.5 * (1.0 / h ** 2 + a / (2 * h))
    diag = np.full(J, -1.0 / h ** 2)
    # ghost node u_{-1} = u_1 - 2 h sigma u_0
    diag[0] += -2 * h * sigma * lower[0]
    up0 = upper[0] + lower[0]
    src = np.zeros(J)
    src[-1] = upper[-1] * far

    def banded(scale):
        ab = np.zeros((3, J))
        ab[0, 1:] = -scale * np.r_[up0, upper[1:-1]]
        ab[1] = 1.0 - scale * diag
        ab[2, :-1] = -scale * lower[1:]
        return ab

    def apply(u, scale):
        out = u + scale * diag * u
        out[:-1] += scale * np.r_[up0, upper[1:-1]] * u[1:]
        out[1:] += scale * lower[1:] * u[:-1]
        return out

    n_steps = max(startup, int(math.ceil(t / (ratio * h))))
    dt = t / n_steps
    u = np.asarray(u0(r[:-1]), float).copy()
    half = banded(0.5 * dt)
    for _ in range(startup):
        u = solve_banded((1, 1), half, u + 0.5 * dt * src)
    cn = banded(0.5 * dt)
    for _ in range(n_steps - startup // 2):
        u = solve_banded((1, 1), cn, apply(u, 0.5 * dt) + dt * src)
    return r, np.r_[u, far]


def _converged(solve, x_eval, h, levels=3):
    vals, sols = [], []
    for k in range(levels):
        r, u = solve(h / 2 ** k)
        sols.append((r, u))
        vals.append(CubicSpline(r, u)(x_eval))
    e1 = float(np.max(np.abs(vals[0] - vals[1])))
    e2 = float(np.max(np.abs(vals[1] - vals[2])))
    if e2 < 1e-10 * max(1.0, float(np.max(np.abs(vals[-1])))):
        order = math.inf
    else:
        order = math.log2(e1 / e2) if e1 > 0 else 0.0
        if order < MIN_ORDER:
            raise OracleConvergenceError(f"grid-doubling order {order:.3f} < {MIN_ORDER} (differences {e1:.3e}, {e2:.3e})")
    r, u = sols[-1]
    return PDESolution(r, u, order, e2 / 3.0)


def robin_pde_1d(sigma, t, x_eval=0.5, u0=None, L=None, h=0.02, ratio=1.0, check=True):
    """Robin problem ``u_t = u''/2`` on ``[0, L]`` with ``u'(0) = sigma u(0)``.

    With ``u0 = 1`` (default) the value at ``x`` equals ``E_x[exp(-sigma lam_t)]``.
    The far end holds ``u0(L)`` (the path is stopped there); ``L`` defaults to
    ``max(x_eval) + 8 sqrt(t) + 1``.  Three grids ``h, h/2, h/4`` are solved
    and an empirical order below 1.9 raises :class:`OracleConvergenceError`.
    """
    _check_t(t)
    u0 = (lambda r: np.ones_like(r)) if u0 is None else u0
    x_eval = np.atleast_1d(np.asarray(x_eval, float))
    if L is None:
        L = float(np.max(x_eval)) + 8 * math.sqrt(t) + 1.0
    L = h * math.ceil(L / h)
    far = float(np.asarray(u0(np.array([L])))[0])

    def solve(hh):
        return _cn_robin(0.0, L, hh, t, sigma, np.zeros_like, u0, far, ratio)

    if not check:
        r, u = solve(h)
        return PDESolution(r, u, math.nan, math.nan)
    return _converged(solve, x_eval, h)


def radial_disk_exterior_pde(beta, t, rho_eval=1.0, R=None, h=0.01, ratio=1.0, check=True):
    """Radial problem outside the unit disk: ``E_rho[exp(beta lam_t)]``.

    Solves ``u_t = (u_rr + u_r / r) / 2`` on ``[1, R]`` with ``u_r(1) = -beta u(1)``
    and ``u = 1`` from time 0 and at ``R`` (default ``max(rho) + 8 sqrt(t) + 1``).
    """
    _check_t(t)
    rho_eval = np.atleast_1d(np.asarray(rho_eval, float))
    if R is None:
        R = float(np.max(rho_eval)) + 8 * math.sqrt(t) + 1.0
    R = 1.0 + h * math.ceil((R - 1.0) / h)

    def solve(hh):
        return _cn_robin(1.0, R, hh, t, -beta, lambda r: 1.0 / r, np.ones_like, 1.0, ratio)

    if not check:
        r, u = solve(h)
        return PDESolution(r, u, math.nan, math.nan)
    return _converged(solve, rho_eval, h)


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product quadrature: nodes ``points`` (Q, d) in sim coordinates and ``weights`` (Q,).

    ``shape`` is the tensor shape; for box grids ``axes`` holds the 1-D node arrays.
    """

    points: np.ndarray
    weights: np.ndarray
    shape: tuple
    axes: tuple = ()
    geometry: ModelGeometry | None = None

    def __len__(self):
        return len(self.weights)

    @classmethod
    def box(cls, lo, hi, counts, rule="trapezoid", geometry=None):
        """Box ``[lo, hi]`` with ``counts`` nodes per axis (``trapezoid``, ``midpoint`` or ``gauss``)."""
        axes, wts = [], []
        for a, b, m in zip(np.atleast_1d(lo), np.atleast_1d(hi), np.atleast_1d(counts)):
            m = int(m)
            if rule == "trapezoid":
                nodes = np.linspace(a, b, m)
                w = np.full(m, (b - a) / (m - 1))
                w[[0, -1]] *= 0.5
            elif rule == "midpoint":
                edges = np.linspace(a, b, m + 1)
                nodes = 0.5 * (edges[1:] + edges[:-1])
                w = np.diff(edges)
            elif rule == "gauss":
                g, gw = legendre.leggauss(m)
                nodes = 0.5 * (b - a) * g + 0.5 * (a + b)
                w = 0.5 * (b - a) * gw
            else:
                raise ValueError(f"unknown rule {rule!r}")
            axes.append(nodes)
            wts.append(w)
        mesh = np.meshgrid(*axes, indexing="ij")
        wmesh = np.meshgrid(*wts, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
        return cls(points, weights, tuple(len(a) for a in axes), tuple(axes), geometry)


def chart_quadrature(geom: ModelGeometry, lo, hi, counts) -> QuadratureGrid:
    """Midpoint rule on a chart box with exact Riemannian cell volumes; nodes returned in sim coordinates."""
    edges = [np.linspace(a, b, int(m) + 1) for a, b, m in zip(lo, hi, counts)]
    lo_m = np.meshgrid(*[e[:-1] for e in edges], indexing="ij")
    hi_m = np.meshgrid(*[e[1:] for e in edges], indexing="ij")
    clo = np.stack([m.ravel() for m in lo_m], axis=-1)
    chi = np.stack([m.ravel() for m in hi_m], axis=-1)
    weights = geom.chart_cell_volume(clo, chi)
    points = geom.from_chart(0.5 * (clo + chi))
    return QuadratureGrid(points, weights, tuple(int(m) for m in counts), (), geom)


def kernel_integral(kernel, x, f, grid: QuadratureGrid):
    """``int kernel(x, y) f(y) dy`` by quadrature (``f`` returns (Q,) or (Q, k))."""
    vals = np.asarray(f(grid.points), float)
    k = np.asarray(kernel(np.asarray(x, float)[None, :], grid.points), float)
    return np.tensordot(k * grid.weights, vals, axes=(0, 0))


# ---------------------------------------------------------------- quadratic form


def _grid_values(section, grid, rank):
    vals = np.asarray(section(grid.points), float).reshape(len(grid), rank)
    return vals.reshape(grid.shape + (rank,))


def _require_compliant(bundle, section):
    flag = getattr(section, "compliant", None)
    if flag is False:
        raise NonCompliantSectionError(f"section {getattr(section, 'name', section)!r} violates the boundary condition")
    if flag is None:
        from .bundles import boundary_trace_violation

        if boundary_trace_violation(bundle, section) > 1e-8:
            raise NonCompliantSectionError("section violates the boundary condition")


def quadratic_form_Q(phi, eta, bundle: BundleModel, grid: QuadratureGrid):
    """``int <grad phi, grad eta> + <W phi, eta> + int_boundary <S phi, eta>`` on a half-space box.

    ``grid`` must be a trapezoid box whose last axis starts at the boundary
    ``x_n = 0``; derivatives are second-order central differences.
    """
    geom = bundle.geometry
    if not isinstance(geom, HalfSpace):
        raise ValueError("quadratic_form_Q is implemented for the flat half-space")
    if not grid.axes or abs(grid.axes[-1][0]) > 1e-12:
        raise ValueError("grid must be a box whose last axis starts on the boundary")
    _require_compliant(bundle, phi)
    _require_compliant(bundle, eta)
    N = bundle.rank
    P = _grid_values(phi, grid, N)
    E = _grid_values(eta, grid, N)
    w = grid.weights.reshape(grid.shape)
    grad = 0.0
    for axis, nodes in enumerate(grid.axes):
        dP = np.gradient(P, nodes, axis=axis, edge_order=2)
        dE = np.gradient(E, nodes, axis=axis, edge_order=2)
        grad = grad + np.sum(dP * dE, axis=-1)
    pts = grid.points
    W = bundle.weitzenbock(pts, geom.reference_frame(pts)).reshape(grid.shape + (N, N))
    pot = np.einsum("...i,...ij,...j->...", P, W, E)
    interior = float(np.sum(w * (grad + pot)))
    # boundary face x_n = 0 with the tangential weights
    on_face = (slice(None),) * (geom.dim - 1) + (0,)
    fpts = pts.reshape(grid.shape + (geom.dim,))[on_face].reshape(-1, geom.dim)
    ctx = BoundaryContext.from_frames(geom, fpts, geom.reference_frame(fpts))
    S = bundle.robin(ctx)
    Pf = P[on_face].reshape(-1, N)
    Ef = E[on_face].reshape(-1, N)
    fw = np.ones(len(fpts))
    if geom.dim > 1:
        tw = np.meshgrid(*[_trap_weights(a) for a in grid.axes[:-1]], indexing="ij")
        fw = np.prod(np.stack([m.ravel() for m in tw], axis=-1), axis=-1)
    boundary = float(np.sum(fw * np.einsum("pi,pij,pj->p", Pf, S, Ef)))
    return interior + boundary


def _trap_weights(nodes):
    w = np.empty_like(nodes)
    d = np.diff(nodes)
    w[0], w[-1] = d[0] / 2, d[-1] / 2
    w[1:-1] = 0.5 * (d[1:] + d[:-1])
    return w


def l2_inner(phi, eta, grid: QuadratureGrid, rank=None):
    P = np.asarray(phi(grid.points), float).reshape(len(grid), -1)
    E = np.asarray(eta(grid.points), float).reshape(len(grid), -1)
    return float(np.sum(grid.weights * np.sum(P * E, axis=1)))


def hodge_dirichlet_energy(alpha, grid: QuadratureGrid):
    """``int |d alpha|^2 + |d* alpha|^2`` for a 1-form on a planar grid (cross-check of Q)."""
    if len(grid.axes) != 2:
        raise ValueError("hodge_dirichlet_energy expects a planar box grid")
    A = _grid_values(alpha, grid, 2)
    x1, x2 = grid.axes
    d11 = np.gradient(A[..., 0], x1, axis=0, edge_order=2)
    d21 = np.gradient(A[..., 0], x2, axis=1, edge_order=2)
    d12 = np.gradient(A[..., 1], x1, axis=0, edge_order=2)
    d22 = np.gradient(A[..., 1], x2, axis=1, edge_order=2)
    curl = d12 - d21
    div = d11 + d22
    return float(np.sum(grid.weights.reshape(grid.shape) * (curl ** 2 + div ** 2)))


# ---------------------------------------------------------------- self-test


def semigroup_defect(kernel, s, t, x, z, nodes):
    """``|K(s+t; x, z) - sum_y K(s; x, y) K(t; y, z) w_y|`` for a quadrature ``nodes = (y, w)``."""
    y, w = nodes
    conv = float(np.sum(kernel(s, x, y) * kernel(t, y, z) * w))
    return abs(kernel(s + t, x, z) - conv)


def self_test_rows():
    """Oracle self-checks as ``(name, value, tolerance, passed)`` rows."""
    rows = []
    for sigma in (1.0, -1.0):
        sol = robin_pde_1d(sigma, 1.0, 0.5)
        gap = abs(float(sol.at(0.5)) - float(halfline_robin_expectation(0.5, 1.0, sigma)))
        rows.append((f"Robin CN sigma={sigma:g} order", sol.order, MIN_ORDER, sol.order >= MIN_ORDER))
        rows.append((f"Robin CN sigma={sigma:g} vs closed form", gap, 1e-4, gap <= 1e-4))
    disk = radial_disk_exterior_pde(1.0, 1.0, 1.0)
    rows.append(("radial disk CN order", disk.order, MIN_ORDER, disk.order >= MIN_ORDER))
    g, gw = legendre.leggauss(200)
    half = (20 * (g + 1) / 2, 20 * gw / 2)
    for bc in _BCS:
        d = semigroup_defect(lambda t, a, b: images_kernel(t, a, b, bc), 0.3, 0.7, 0.5, 1.2, half)
        rows.append((f"images {bc} semigroup defect", d, 1e-4, d <= 1e-4))
    gt, gtw = legendre.leggauss(80)
    th = (np.pi / 4) * (gt + 1)
    ph = np.linspace(-np.pi, np.pi, 161)[:-1]
    T, P = np.meshgrid(th, ph, indexing="ij")
    y = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    w = (np.outer((np.pi / 4) * gtw * np.sin(th), np.full(len(ph), 2 * np.pi / len(ph)))).ravel()
    x, z = np.array([0.0, 0.0, 1.0]), np.array([np.sin(1.0), 0.0, np.cos(1.0)])
    for bc in _BCS:
        d = semigroup_defect(lambda t, a, b: hemisphere_kernel(t, a, b, bc), 0.3, 0.4, x, z, (y, w))
        rows.append((f"hemisphere {bc} semigroup defect", d, 1e-4, d <= 1e-4))
    return rows


def self_test_table():
    lines = [f"{'oracle check':40s} {'value':>12s} {'bound':>10s}  status"]
    for name, value, tol, ok in self_test_rows():
        lines.append(f"{name:40s} {value:12.4e} {tol:10.2e}  {'ok' if ok else 'FAIL'}")
    return "\n".join(lines)
