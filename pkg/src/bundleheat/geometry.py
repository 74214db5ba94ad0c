"""Model manifolds with boundary.

Three catalogue geometries are provided, each with an analytic chart, an
embedding used for path simulation ("sim coordinates"), and geodesic collar
(Fermi) coordinates near the boundary:

=================  ==================  ======================  ==============
id                 chart coordinates   sim coordinates         boundary
=================  ==================  ======================  ==============
``half_space``     Cartesian x         Cartesian x             x_n = 0
``disk_exterior``  polar (rho, phi)    Cartesian (x1, x2)      rho = 1
``hemisphere``     (theta, phi)        unit vector in R^3      theta = pi/2
=================  ==================  ======================  ==============

``theta`` is the colatitude.  The normal collar coordinate ``r`` is the
geodesic distance to the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NotOnBoundaryError, OutsideChartError, OutsideCollarError

#: Collar radius used for the half-space, where the collar is global.
HALF_SPACE_COLLAR = 1.0e12
#: Distance from a polar-chart singularity below which the chart is not used.
SINGULAR_MARGIN = 1.0e-3

_TOL = 1e-12


class AssumptionWitness(NamedTuple):
    """Curvature constants certifying the bounded-geometry assumption."""

    ricci_lower: float
    shape_lower: float
    shape_upper: float
    collar_radius: float
    sectional_upper: float
    convex: bool


@dataclass(frozen=True)
class BoundaryData:
    """Second fundamental form data at a boundary point.

    ``normal`` and the columns of ``tangent_basis`` are chart components;
    ``shape`` is the shape operator ``-grad(nu)`` in the orthonormal basis
    ``tangent_basis`` of the boundary tangent space.
    """

    y: np.ndarray
    normal: np.ndarray
    tangent_basis: np.ndarray
    shape: np.ndarray
    principal_curvatures: np.ndarray


class ModelGeometry:
    """Base class for the catalogue geometries."""

    id: str = ""
    dim: int = 0
    ambient_dim: int = 0
    r0: float = 0.0
    flat: bool = True

    # ---- chart -------------------------------------------------------------
    def metric(self, q):
        raise NotImplementedError

    def christoffel_at(self, q):
        """Christoffel symbols ``G[k, i, j]`` (upper index first) at chart point ``q``."""
        raise NotImplementedError

    def to_chart(self, x):
        raise NotImplementedError

    def from_chart(self, q):
        raise NotImplementedError

    def chart_cell_volume(self, lo, hi):
        """Riemannian volume of the chart box ``[lo, hi]``."""
        raise NotImplementedError

    # ---- collar ------------------------------------------------------------
    def collar_coords(self, q):
        """Chart point -> ``(r, y)`` with ``y`` the foot point in chart coordinates."""
        raise NotImplementedError

    def from_collar(self, r, y):
        raise NotImplementedError

    def shape_operator(self, y) -> BoundaryData:
        raise NotImplementedError

    def witnesses(self) -> AssumptionWitness:
        raise NotImplementedError

    # ---- sim coordinates ---------------------------------------------------
    def normal_coordinate(self, x):
        """Distance to the boundary of sim-coordinate points ``x``."""
        raise NotImplementedError

    def collar_normal(self, x):
        """Unit inward normal field of the collar (the ``d/dr`` direction) at ``x``."""
        raise NotImplementedError

    def shape_ambient(self, x):
        """Shape operator at the foot point of ``x``, as a sim-coordinate matrix.

        The normal direction is in the kernel.
        """
        raise NotImplementedError

    def reference_frame(self, x):
        """Orthonormal reference frame at ``x``; columns are sim-coordinate vectors."""
        raise NotImplementedError

    def distance(self, x, c):
        raise NotImplementedError

    def sample_boundary(self, rng, count, center=None, radius=None):
        raise NotImplementedError

    def sample_points(self, rng, count, max_r=1.0):
        raise NotImplementedError

    def describe(self):
        return {"id": self.id, "dimension": self.dim}

    def __repr__(self):
        return f"{type(self).__name__}()"

    def _check_collar(self, r):
        r = np.asarray(r)
        if np.any(r < -1e-9) or np.any(r >= self.r0):
            raise OutsideCollarError(f"normal coordinate outside [0, {self.r0}) for {self.id}")


class HalfSpace(ModelGeometry):
    """Flat half-space ``{x in R^n : x_n >= 0}`` in its Cartesian chart."""

    id = "half_space"
    flat = True

    def __init__(self, n: int = 2):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(n)
        self.ambient_dim = int(n)
        self.r0 = HALF_SPACE_COLLAR

    def __repr__(self):
        return f"HalfSpace({self.dim})"

    def __eq__(self, other):
        return isinstance(other, HalfSpace) and other.dim == self.dim

    def __hash__(self):
        return hash(("half_space", self.dim))

    def _check(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != self.dim:
            raise OutsideChartError(f"expected {self.dim} coordinates, got shape {q.shape}")
        if np.any(q[..., -1] < -1e-9):
            raise OutsideChartError(f"point {q} has negative normal coordinate")
        return q

    def metric(self, q):
        q = self._check(q)
        return np.broadcast_to(np.eye(self.dim), q.shape[:-1] + (self.dim, self.dim)).copy()

    def christoffel_at(self, q):
        q = self._check(q)
        n = self.dim
        return np.zeros(q.shape[:-1] + (n, n, n))

    def to_chart(self, x):
        return np.asarray(x, dtype=float)

    def from_chart(self, q):
        return np.asarray(q, dtype=float)

    def chart_cell_volume(self, lo, hi):
        return np.prod(np.asarray(hi, float) - np.asarray(lo, float), axis=-1)

    def collar_coords(self, q):
        q = self._check(q)
        r = q[..., -1].copy()
        y = q.copy()
        y[..., -1] = 0.0
        return r, y

    def from_collar(self, r, y):
        y = np.array(y, dtype=float)
        self._check_collar(r)
        y[..., -1] = r
        return y

    def shape_operator(self, y):
        y = self._check(y)
        if abs(y[-1]) > 1e-9:
            raise NotOnBoundaryError(f"{y} is not on the boundary of {self!r}")
        n = self.dim
        normal = np.zeros(n)
        normal[-1] = 1.0
        tangent = np.eye(n)[:, : n - 1]
        shape = np.zeros((n - 1, n - 1))
        return BoundaryData(y, normal, tangent, shape, np.zeros(n - 1))

    def witnesses(self):
        return AssumptionWitness(0.0, 0.0, 0.0, self.r0, 0.0, True)

    def normal_coordinate(self, x):
        return np.asarray(x)[..., -1]

    def collar_normal(self, x):
        x = np.asarray(x)
        out = np.zeros_like(x, dtype=float)
        out[..., -1] = 1.0
        return out

    def shape_ambient(self, x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (self.dim, self.dim))

    def reference_frame(self, x):
        x = np.asarray(x)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    def distance(self, x, c):
        return np.linalg.norm(np.asarray(x) - np.asarray(c), axis=-1)

    def sample_boundary(self, rng, count, center=None, radius=None):
        n = self.dim
        if center is None:
            center, radius = np.zeros(n), 5.0
        pts = np.asarray(center, float) + rng.uniform(-radius, radius, size=(count, n))
        pts[:, -1] = 0.0
        return pts

    def sample_points(self, rng, count, max_r=1.0):
        pts = rng.uniform(-5.0, 5.0, size=(count, self.dim))
        pts[:, -1] = rng.uniform(0.0, max_r, size=count)
        return pts


class DiskExterior2D(ModelGeometry):
    """Exterior of the unit disk in the plane; boundary is the unit circle.

    The inward normal points away from the origin, so the boundary has
    principal curvature -1 (non-convex).
    """

    id = "disk_exterior"
    dim = 2
    ambient_dim = 2
    r0 = 0.5
    flat = True

    def __eq__(self, other):
        return isinstance(other, DiskExterior2D)

    def __hash__(self):
        return hash("disk_exterior")

    def __repr__(self):
        return "DiskExterior2D()"

    def _check(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != 2:
            raise OutsideChartError(f"expected polar (rho, phi), got shape {q.shape}")
        if np.any(q[..., 0] < 1.0 - 1e-9):
            raise OutsideChartError(f"point {q} lies inside the unit disk")
        return q

    def metric(self, q):
        q = self._check(q)
        g = np.zeros(q.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = q[..., 0] ** 2
        return g

    def christoffel_at(self, q):
        q = self._check(q)
        rho = q[..., 0]
        G = np.zeros(q.shape[:-1] + (2, 2, 2))
        G[..., 0, 1, 1] = -rho
        G[..., 1, 0, 1] = 1.0 / rho
        G[..., 1, 1, 0] = 1.0 / rho
        return G

    def to_chart(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.hypot(x[..., 0], x[..., 1]), np.arctan2(x[..., 1], x[..., 0])], axis=-1)

    def from_chart(self, q):
        q = np.asarray(q, dtype=float)
        return np.stack([q[..., 0] * np.cos(q[..., 1]), q[..., 0] * np.sin(q[..., 1])], axis=-1)

    def chart_cell_volume(self, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        return 0.5 * (hi[..., 0] ** 2 - lo[..., 0] ** 2) * (hi[..., 1] - lo[..., 1])

    def collar_coords(self, q):
        q = self._check(q)
        r = q[..., 0] - 1.0
        self._check_collar(r)
        y = q.copy()
        y[..., 0] = 1.0
        return r, y

    def from_collar(self, r, y):
        self._check_collar(r)
        y = np.array(y, dtype=float)
        y[..., 0] = 1.0 + np.asarray(r)
        return y

    def shape_operator(self, y):
        y = self._check(y)
        if abs(y[0] - 1.0) > 1e-9:
            raise NotOnBoundaryError(f"{y} is not on the unit circle")
        normal = np.array([1.0, 0.0])
        tangent = np.array([[0.0], [1.0]])  # d/dphi has unit length at rho = 1
        return BoundaryData(y, normal, tangent, np.array([[-1.0]]), np.array([-1.0]))

    def witnesses(self):
        return AssumptionWitness(0.0, -1.0, -1.0, self.r0, 0.0, False)

    def normal_coordinate(self, x):
        x = np.asarray(x)
        return np.hypot(x[..., 0], x[..., 1]) - 1.0

    def collar_normal(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.hypot(x[..., 0], x[..., 1])[..., None]

    def collar_tangent(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        return np.stack([-x[..., 1], x[..., 0]], axis=-1) / rho[..., None]

    def shape_ambient(self, x):
        tau = self.collar_tangent(x)
        return -tau[..., :, None] * tau[..., None, :]

    def reference_frame(self, x):
        x = np.asarray(x)
        return np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()

    def distance(self, x, c):
        return np.linalg.norm(np.asarray(x) - np.asarray(c), axis=-1)

    def sample_boundary(self, rng, count, center=None, radius=None):
        phi = rng.uniform(-np.pi, np.pi, size=count)
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def sample_points(self, rng, count, max_r=1.0):
        phi = rng.uniform(-np.pi, np.pi, size=count)
        rho = 1.0 + rng.uniform(0.0, max_r, size=count)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)


class Hemisphere2D(ModelGeometry):
    """Closed upper unit hemisphere ``{z >= 0}`` of the round sphere.

    The boundary is the equator, a totally geodesic circle.
    """

    id = "hemisphere"
    dim = 2
    ambient_dim = 3
    r0 = np.pi / 4
    flat = False

    def __eq__(self, other):
        return isinstance(other, Hemisphere2D)

    def __hash__(self):
        return hash("hemisphere")

    def __repr__(self):
        return "Hemisphere2D()"

    def _check(self, q, singular_ok=True):
        q = np.asarray(q, dtype=float)
        if q.shape[-1] != 2:
            raise OutsideChartError(f"expected (theta, phi), got shape {q.shape}")
        theta = q[..., 0]
        if np.any(theta > np.pi / 2 + 1e-9) or np.any(theta < 0.0):
            raise OutsideChartError(f"colatitude of {q} outside [0, pi/2]")
        if not singular_ok and np.any(theta < SINGULAR_MARGIN):
            raise OutsideChartError(f"{q} is within {SINGULAR_MARGIN} of the polar singularity")
        return q

    def metric(self, q):
        q = self._check(q)
        g = np.zeros(q.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = np.sin(q[..., 0]) ** 2
        return g

    def christoffel_at(self, q):
        q = self._check(q, singular_ok=False)
        th = q[..., 0]
        G = np.zeros(q.shape[:-1] + (2, 2, 2))
        G[..., 0, 1, 1] = -np.sin(th) * np.cos(th)
        G[..., 1, 0, 1] = np.cos(th) / np.sin(th)
        G[..., 1, 1, 0] = G[..., 1, 0, 1]
        return G

    def to_chart(self, x):
        x = np.asarray(x, dtype=float)
        z = np.clip(x[..., 2], -1.0, 1.0)
        return np.stack([np.arccos(z), np.arctan2(x[..., 1], x[..., 0])], axis=-1)

    def from_chart(self, q):
        q = np.asarray(q, dtype=float)
        th, ph = q[..., 0], q[..., 1]
        s = np.sin(th)
        return np.stack([s * np.cos(ph), s * np.sin(ph), np.cos(th)], axis=-1)

    def chart_cell_volume(self, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        return (np.cos(lo[..., 0]) - np.cos(hi[..., 0])) * (hi[..., 1] - lo[..., 1])

    def collar_coords(self, q):
        q = self._check(q)
        r = np.pi / 2 - q[..., 0]
        self._check_collar(r)
        y = q.copy()
        y[..., 0] = np.pi / 2
        return r, y

    def from_collar(self, r, y):
        self._check_collar(r)
        y = np.array(y, dtype=float)
        y[..., 0] = np.pi / 2 - np.asarray(r)
        return y

    def shape_operator(self, y):
        y = self._check(y)
        if abs(y[0] - np.pi / 2) > 1e-9:
            raise NotOnBoundaryError(f"{y} is not on the equator")
        normal = np.array([-1.0, 0.0])
        tangent = np.array([[0.0], [1.0]])
        return BoundaryData(y, normal, tangent, np.zeros((1, 1)), np.zeros(1))

    def witnesses(self):
        return AssumptionWitness(1.0, 0.0, 0.0, self.r0, 1.0, True)

    def normal_coordinate(self, x):
        return np.arcsin(np.clip(np.asarray(x)[..., 2], -1.0, 1.0))

    def collar_normal(self, x):
        x = np.asarray(x, dtype=float)
        z = x[..., 2]
        nu = -z[..., None] * x
        nu[..., 2] += 1.0
        return nu / np.linalg.norm(nu, axis=-1, keepdims=True)

    def collar_tangent(self, x):
        x = np.asarray(x, dtype=float)
        s = np.hypot(x[..., 0], x[..., 1])
        return np.stack([-x[..., 1] / s, x[..., 0] / s, np.zeros_like(s)], axis=-1)

    def shape_ambient(self, x):
        x = np.asarray(x)
        return np.zeros(x.shape[:-1] + (3, 3))

    def reference_frame(self, x):
        x = np.asarray(x, dtype=float)
        th, ph = np.moveaxis(self.to_chart(x), -1, 0)
        ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
        e_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
        e_ph = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
        return np.stack([e_th, e_ph], axis=-1)

    def distance(self, x, c):
        d = np.clip(np.sum(np.asarray(x) * np.asarray(c), axis=-1), -1.0, 1.0)
        return np.arccos(d)

    def sample_boundary(self, rng, count, center=None, radius=None):
        phi = rng.uniform(-np.pi, np.pi, size=count)
        return np.stack([np.cos(phi), np.sin(phi), np.zeros(count)], axis=-1)

    def sample_points(self, rng, count, max_r=1.0):
        phi = rng.uniform(-np.pi, np.pi, size=count)
        r = rng.uniform(0.0, min(max_r, np.pi / 2), size=count)
        return self.from_chart(np.stack([np.pi / 2 - r, phi], axis=-1))


CATALOGUE = {"half_space": HalfSpace, "disk_exterior": DiskExterior2D, "hemisphere": Hemisphere2D}


def make_geometry(geometry_id: str, dimension: int | None = None) -> ModelGeometry:
    """Build a catalogue geometry from its config id."""
    if geometry_id not in CATALOGUE:
        raise KeyError(f"unknown geometry {geometry_id!r}; expected one of {sorted(CATALOGUE)}")
    if geometry_id == "half_space":
        return HalfSpace(2 if dimension is None else int(dimension))
    if dimension not in (None, 2):
        raise ValueError(f"{geometry_id} is two-dimensional")
    return CATALOGUE[geometry_id]()


def christoffel_at(geom: ModelGeometry, q):
    return geom.christoffel_at(q)


def collar_coords(geom: ModelGeometry, q):
    return geom.collar_coords(q)


def shape_operator(geom: ModelGeometry, y) -> BoundaryData:
    return geom.shape_operator(y)
