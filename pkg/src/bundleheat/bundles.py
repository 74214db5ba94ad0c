"""Vector bundles with Weitzenbock term and mixed boundary data.

All matrices are expressed in frame coordinates: a path carries an
orthonormal frame of the tangent space and every fibre quantity (the
Weitzenbock field W, the boundary involution I, the Robin endomorphism S)
is written in the induced basis of the fibre.  Sections are evaluated in
the geometry's *reference* frame; ``BundleModel.transport`` converts
between frames.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, NamedTuple

import numpy as np

from .errors import BundleInvariantError
from .geometry import HalfSpace, ModelGeometry

_ALGEBRA_TOL = 1e-10


@dataclass
class BoundaryContext:
    """Boundary data seen by a batch of paths, in their frame coordinates.

    ``y`` are sim-coordinate points, ``u`` the inward unit normal and
    ``shape`` the shape operator (normal direction in its kernel).
    """

    y: np.ndarray
    u: np.ndarray
    shape: np.ndarray

    @classmethod
    def from_frames(cls, geom: ModelGeometry, x, frames):
        x = np.asarray(x, dtype=float)
        nu = geom.collar_normal(x)
        u = np.einsum("pai,pa->pi", frames, nu)
        B = geom.shape_ambient(x)
        shape = np.einsum("pai,pab,pbj->pij", frames, B, frames)
        return cls(x, u, shape)

    def __len__(self):
        return len(self.u)


# ---------------------------------------------------------------- exterior algebra


@lru_cache(maxsize=None)
def _subsets(n, p):
    return tuple(itertools.combinations(range(n), p))


def _sorted_sign(seq):
    """Sign of the permutation sorting ``seq`` (0 if it has repeats) and the sorted tuple."""
    if len(set(seq)) < len(seq):
        return 0, None
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                sign = -sign
    return sign, tuple(seq)


@lru_cache(maxsize=None)
def _derivation_tensor(n, p):
    basis = _subsets(n, p)
    index = {I: k for k, I in enumerate(basis)}
    C = len(basis)
    T = np.zeros((C, C, n, n))
    for a, I in enumerate(basis):
        for k, ik in enumerate(I):
            for j in range(n):
                seq = I[:k] + (j,) + I[k + 1 :]
                s, J = _sorted_sign(seq)
                if s:
                    T[a, index[J], j, ik] += s
    return T


@lru_cache(maxsize=None)
def _normal_tensor(n, p):
    """``T[I, J, a, b]`` with ``Pi_n(u)_{IJ} = sum_ab T[I, J, a, b] u_a u_b``."""
    C = comb(n, p)
    T = np.zeros((C, C, n, n))
    if p == 0:
        return T
    basis = _subsets(n, p)
    index = {I: k for k, I in enumerate(basis)}
    lower = _subsets(n, p - 1)
    lindex = {J: k for k, J in enumerate(lower)}
    # interior product by e_b: Lambda^p -> Lambda^{p-1}
    inter = np.zeros((n, len(lower), C))
    for b in range(n):
        for k, J in enumerate(lower):
            s, I = _sorted_sign((b,) + J)
            if s:
                inter[b, k, index[I]] = s
    # exterior product by e_a: Lambda^{p-1} -> Lambda^p
    exter = np.zeros((n, C, len(lower)))
    for a in range(n):
        for k, I in enumerate(basis):
            for pos, ik in enumerate(I):
                if ik == a:
                    J = I[:pos] + I[pos + 1 :]
                    exter[a, k, lindex[J]] = (-1) ** pos
    for a in range(n):
        for b in range(n):
            T[:, :, a, b] = exter[a] @ inter[b]
    return T


def compound_matrix(A, p):
    """``p``-th exterior power of the ``(..., n, n)`` matrices ``A``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if p == 0:
        return np.ones(A.shape[:-2] + (1, 1))
    if p == 1:
        return A.copy()
    idx = np.array(_subsets(n, p))
    sub = A[..., idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def derivation_matrix(X, p):
    """Extension of ``X`` to ``Lambda^p`` as a derivation."""
    X = np.asarray(X, dtype=float)
    return np.einsum("IJab,...ab->...IJ", _derivation_tensor(X.shape[-1], p), X)


def normal_projector(u, p):
    """Orthogonal projection of ``Lambda^p`` onto forms containing the unit covector ``u``."""
    u = np.asarray(u, dtype=float)
    return np.einsum("IJab,...a,...b->...IJ", _normal_tensor(u.shape[-1], p), u, u)


def form_basis_labels(n, p):
    return ["^".join(f"dx{i + 1}" for i in I) or "1" for I in _subsets(n, p)]


def _sym_expm(A, scale):
    """``exp(scale * A)`` for stacks of symmetric ``A``."""
    lam, V = np.linalg.eigh(A)
    return np.einsum("...ik,...k,...jk->...ij", V, np.exp(scale * lam), V)


# ---------------------------------------------------------------- bundle model


@dataclass(frozen=True, eq=False)
class BundleModel:
    """Fibre rank, Weitzenbock field and mixed boundary data of a bundle.

    ``weitzenbock_fn(x, frames)`` returns W in frame coordinates,
    ``involution_fn(ctx)`` and ``robin_fn(ctx)`` the boundary involution and
    Robin endomorphism for a :class:`BoundaryContext`, and
    ``transport_fn(A)`` the fibre action of the orthogonal frame change ``A``.
    """

    name: str
    rank: int
    geometry: ModelGeometry
    weitzenbock_fn: Callable
    involution_fn: Callable
    robin_fn: Callable
    transport_fn: Callable
    c1: float
    c2: float
    constant_weitzenbock: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def weitzenbock(self, x, frames):
        return self.weitzenbock_fn(np.asarray(x, float), np.asarray(frames, float))

    def involution(self, ctx: BoundaryContext):
        return self.involution_fn(ctx)

    def robin(self, ctx: BoundaryContext):
        return self.robin_fn(ctx)

    def transport(self, A):
        return self.transport_fn(np.asarray(A, float))

    def projections(self, ctx: BoundaryContext):
        inv = self.involution(ctx)
        eye = np.eye(self.rank)
        return 0.5 * (eye + inv), 0.5 * (eye - inv)

    @property
    def has_dirichlet_part(self) -> bool:
        return bool(self.params.get("dirichlet", True))

    def weitzenbock_propagator(self, x, frames, dt, sign=-1.0):
        """``exp(sign * W dt / 2)``; a single matrix when W is constant."""
        if self.constant_weitzenbock is not None:
            return _sym_expm(self.constant_weitzenbock, 0.5 * sign * dt)
        return _sym_expm(self.weitzenbock(x, frames), 0.5 * sign * dt)

    def boundary_factor(self, ctx: BoundaryContext, dlam):
        """``exp(-S dlam) (I - Pi_-)`` for each path of the context."""
        S = self.robin(ctx)
        _, Pm = self.projections(ctx)
        E = _sym_expm(S, -np.asarray(dlam)[:, None])
        return E - E @ Pm

    def boundary_factor_inverse(self, ctx: BoundaryContext, dlam):
        return _sym_expm(self.robin(ctx), np.asarray(dlam)[:, None])

    def describe(self):
        return {"name": self.name, "rank": self.rank, "geometry": self.geometry.describe(), **self.params}

    def __repr__(self):
        return f"BundleModel({self.name!r}, rank={self.rank}, geometry={self.geometry!r})"


def _constant(mat, count):
    return np.broadcast_to(mat, (count,) + mat.shape)


def _identity_transport(rank):
    def transport(A):
        return np.broadcast_to(np.eye(rank), A.shape[:-2] + (rank, rank))

    return transport


def forms_bundle(geom: ModelGeometry, p: int, potential: float = 0.0) -> BundleModel:
    """Bundle of ``p``-forms with absolute boundary conditions.

    ``F_+`` is the tangential part, ``F_-`` the normal part, and the Robin term
    is the derivation extension of the shape operator restricted to ``F_+``.
    Every catalogue geometry has constant sectional curvature ``K``, so the
    Weitzenbock term is ``p (n - p) K``; ``potential`` adds a constant multiple
    of the identity.
    """
    n = geom.dim
    if not 0 <= p <= n:
        raise ValueError(f"form degree {p} out of range [0, {n}]")
    N = comb(n, p)
    K = geom.witnesses().sectional_upper
    wconst = (p * (n - p) * K + potential) * np.eye(N)

    def weitzenbock(x, frames):
        return _constant(wconst, len(x))

    def involution(ctx):
        return np.eye(N) - 2.0 * normal_projector(ctx.u, p)

    def robin(ctx):
        Pt = np.eye(N) - normal_projector(ctx.u, p)
        return Pt @ derivation_matrix(ctx.shape, p) @ Pt

    def transport(A):
        return compound_matrix(A, p)

    kappas = geom.shape_operator(_boundary_chart_point(geom)).principal_curvatures
    sums = [sum(c) for c in itertools.combinations(kappas, p)] if p <= n - 1 else []
    c2 = float(min(sums)) if sums else 0.0
    return BundleModel(
        name=f"forms:{p}",
        rank=N,
        geometry=geom,
        weitzenbock_fn=weitzenbock,
        involution_fn=involution,
        robin_fn=robin,
        transport_fn=transport,
        c1=float(wconst[0, 0]),
        c2=c2,
        constant_weitzenbock=wconst,
        params={"degree": p, "potential": potential, "dirichlet": p > 0, "trivial_boundary": p == 0},
    )


def _boundary_chart_point(geom):
    if isinstance(geom, HalfSpace):
        return np.zeros(geom.dim)
    return geom.to_chart(geom.sample_boundary(np.random.default_rng(0), 1)[0])


GAMMA_2D = np.array([[[0.0, 1.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, -1.0]]])


def spinor2d_bundle(geom: ModelGeometry, orientation: int = 1) -> BundleModel:
    """Toy spinor bundle on the flat half-plane.

    Clifford multiplication uses the real symmetric anticommuting pair
    ``gamma(e1) = [[0, 1], [1, 0]]`` and ``gamma(e2) = [[1, 0], [0, -1]]``.
    The boundary involution is ``orientation * gamma(nu)``, which
    anticommutes with tangential Clifford multiplication.  With a flat
    metric, a trivial auxiliary line bundle and a totally geodesic boundary
    both the curvature term and the mean-curvature Robin term vanish.
    """
    if not (isinstance(geom, HalfSpace) and geom.dim == 2):
        raise ValueError("spinor2d_bundle is only defined on HalfSpace(2)")
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    zero = np.zeros((2, 2))

    def weitzenbock(x, frames):
        return _constant(zero, len(x))

    def involution(ctx):
        return orientation * np.einsum("pi,iab->pab", ctx.u, GAMMA_2D)

    def robin(ctx):
        return _constant(zero, len(ctx))

    def transport(A):
        # spin lift of a planar rotation by angle a: rotation by a/2 via gamma(e1) gamma(e2)
        angle = np.arctan2(A[..., 1, 0], A[..., 0, 0])
        c, s = np.cos(angle / 2), np.sin(angle / 2)
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)

    return BundleModel(
        name="spinor2d",
        rank=2,
        geometry=geom,
        weitzenbock_fn=weitzenbock,
        involution_fn=involution,
        robin_fn=robin,
        transport_fn=transport,
        c1=0.0,
        c2=0.0,
        constant_weitzenbock=zero,
        params={"orientation": orientation, "dirichlet": True},
    )


def _as_field(value, N, label):
    """Wrap a constant matrix or a callable of points into a callable."""
    if callable(value):
        return value, None
    mat = np.asarray(value, dtype=float)
    if mat.ndim == 0:
        mat = mat * np.eye(N)
    if mat.shape != (N, N):
        raise BundleInvariantError(f"{label} must be {N}x{N}, got shape {mat.shape}")

    def fn(points):
        return _constant(mat, len(points))

    return fn, mat


def generic_bundle(
    N: int,
    W=0.0,
    S=0.0,
    involution=1.0,
    c1: float | None = None,
    c2: float | None = None,
    geometry: ModelGeometry | None = None,
    samples: int = 256,
    seed: int = 0,
    name: str = "generic",
) -> BundleModel:
    """Trivial rank-``N`` bundle with user-supplied W, S and involution.

    Each of ``W``, ``S`` and ``involution`` is a scalar (times identity), an
    ``N x N`` array, or a callable of sim-coordinate points returning a
    stack of matrices (``W`` at interior points, the others at boundary
    points).  Invariants are verified at ``samples`` random points and a
    violation raises :class:`BundleInvariantError`.
    """
    if N < 1:
        raise ValueError("rank must be >= 1")
    geom = geometry if geometry is not None else HalfSpace(2)
    Wfn, Wc = _as_field(W, N, "W")
    Sfn, Sc = _as_field(S, N, "S")
    Ifn, Ic = _as_field(involution, N, "involution")

    rng = np.random.default_rng(seed)
    interior = geom.sample_points(rng, samples)
    boundary = geom.sample_boundary(rng, samples)
    Ws, Ss, Is = Wfn(interior), Sfn(boundary), Ifn(boundary)
    eye = np.eye(N)
    for pts, mats, label in ((interior, Ws, "W"), (boundary, Ss, "S"), (boundary, Is, "involution")):
        bad = np.max(np.abs(mats - np.swapaxes(mats, -1, -2)), axis=(-1, -2)) > _ALGEBRA_TOL
        if bad.any():
            raise BundleInvariantError(f"{label} is not symmetric", pts[np.argmax(bad)])
    bad = np.max(np.abs(Is @ Is - eye), axis=(-1, -2)) > _ALGEBRA_TOL
    if bad.any():
        raise BundleInvariantError("involution does not square to the identity", boundary[np.argmax(bad)])
    Pm = 0.5 * (eye - Is)
    Pp = 0.5 * (eye + Is)
    bad = np.max(np.abs(Ss @ Pp - Pp @ Ss), axis=(-1, -2)) > _ALGEBRA_TOL
    bad |= np.max(np.abs(Ss @ Pm), axis=(-1, -2)) > _ALGEBRA_TOL
    if bad.any():
        raise BundleInvariantError("S must commute with the projections and vanish on F_-", boundary[np.argmax(bad)])

    w_min = float(np.linalg.eigvalsh(Ws)[:, 0].min())
    s_min = _restricted_min(Ss, Pm)
    if c1 is None:
        c1 = w_min
    elif w_min < c1 - 1e-8:
        raise BundleInvariantError(f"W has eigenvalue {w_min} below declared c1={c1}", interior[0])
    if c2 is None:
        c2 = s_min if np.isfinite(s_min) else 0.0
    elif s_min < c2 - 1e-8:
        raise BundleInvariantError(f"S has eigenvalue {s_min} on F_+ below declared c2={c2}", boundary[0])

    def weitzenbock(x, frames):
        return Wfn(x)

    def involution_ctx(ctx):
        return Ifn(ctx.y)

    def robin_ctx(ctx):
        return Sfn(ctx.y)

    params = {"dirichlet": not (Ic is not None and np.allclose(Ic, eye))}
    params["trivial_boundary"] = (not params["dirichlet"]) and Sc is not None and not np.any(Sc)
    for key, mat in (("W", Wc), ("S", Sc), ("involution", Ic)):
        params[key] = mat.tolist() if mat is not None else "callable"
    return BundleModel(
        name=name,
        rank=N,
        geometry=geom,
        weitzenbock_fn=weitzenbock,
        involution_fn=involution_ctx,
        robin_fn=robin_ctx,
        transport_fn=_identity_transport(N),
        c1=float(c1),
        c2=float(c2),
        constant_weitzenbock=Wc,
        params=params,
    )


def scalar_bundle(geom: ModelGeometry, potential: float = 0.0, robin: float = 0.0) -> BundleModel:
    """Functions with Neumann (``robin = 0``) or Robin boundary condition."""
    return generic_bundle(1, W=potential, S=robin, involution=1.0, geometry=geom, name="scalar")


def _restricted_min(S, Pm):
    """Smallest eigenvalue of ``S`` restricted to the range of ``1 - Pm``."""
    if S.size == 0:
        return np.inf
    rank_minus = np.rint(np.trace(Pm, axis1=-2, axis2=-1)).astype(int)
    keep = rank_minus < S.shape[-1]
    if not keep.any():
        return np.inf
    S, Pm = S[keep], Pm[keep]
    shift = np.abs(S).max() + 1.0
    return float(np.linalg.eigvalsh(S + shift * Pm)[:, 0].min())


class LowerBounds(NamedTuple):
    w_min: float
    sigma_min: float

    def violates(self, c1, c2, tol=1e-8):
        return self.w_min < c1 - tol or self.sigma_min < c2 - tol


def random_frames(geom: ModelGeometry, x, rng):
    """Reference frames at ``x`` rotated by random proper orthogonal matrices."""
    n = geom.dim
    Q, R = np.linalg.qr(rng.standard_normal((len(x), n, n)))
    Q = Q * np.sign(np.diagonal(R, axis1=-2, axis2=-1))[:, None, :]
    flip = np.linalg.det(Q) < 0
    Q[flip, :, 0] *= -1
    return np.einsum("pai,pij->paj", geom.reference_frame(x), Q)


def lower_bounds(bundle: BundleModel, count: int = 1000, seed: int = 0) -> LowerBounds:
    """Sampled minima of the lowest eigenvalues of W and of S on ``F_+``."""
    geom = bundle.geometry
    rng = np.random.default_rng(seed)
    x = geom.sample_points(rng, count)
    W = bundle.weitzenbock(x, random_frames(geom, x, rng))
    w_min = float(np.linalg.eigvalsh(W)[:, 0].min())
    y = geom.sample_boundary(rng, count)
    ctx = BoundaryContext.from_frames(geom, y, random_frames(geom, y, rng))
    _, Pm = bundle.projections(ctx)
    sigma_min = _restricted_min(bundle.robin(ctx), Pm)
    return LowerBounds(w_min, sigma_min)


# ---------------------------------------------------------------- sections


@dataclass(frozen=True, eq=False)
class SectionField:
    """A section given by its components in the reference frame.

    ``fn`` maps sim-coordinate points ``(P, d)`` to ``(P, rank)``.  Values
    vanish outside the geodesic ball of ``support_radius`` around ``center``
    (``inf`` for sections without compact support).
    """

    name: str
    rank: int
    fn: Callable
    geometry: ModelGeometry
    center: np.ndarray | None = None
    support_radius: float = np.inf
    compliant: bool = True
    harmonic: str | None = None

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.asarray(self.fn(x), dtype=float).reshape(len(x), self.rank)
        if np.isfinite(self.support_radius):
            vals = np.where((self.geometry.distance(x, self.center) < self.support_radius)[:, None], vals, 0.0)
        return vals

    @property
    def compact(self) -> bool:
        return np.isfinite(self.support_radius)

    def describe(self):
        out = {"name": self.name, "rank": self.rank}
        if self.compact:
            out.update(center=np.asarray(self.center).tolist(), radius=self.support_radius)
        return out


def boundary_trace_violation(bundle: BundleModel, fn, center=None, radius=None, count=512, seed=0):
    """Largest ``|Pi_- phi|`` over sampled boundary points."""
    geom = bundle.geometry
    rng = np.random.default_rng(seed)
    y = geom.sample_boundary(rng, count, center=center, radius=radius)
    if center is not None and np.isfinite(radius):
        y = y[geom.distance(y, center) < radius]
        if len(y) == 0:
            return 0.0
    ctx = BoundaryContext.from_frames(geom, y, geom.reference_frame(y))
    _, Pm = bundle.projections(ctx)
    vals = np.asarray(fn(y), dtype=float).reshape(len(y), bundle.rank)
    return float(np.max(np.linalg.norm(np.einsum("pij,pj->pi", Pm, vals), axis=-1)))


def bump_profile(s):
    """Smooth bump ``exp(1 - 1/(1 - s^2))`` on ``|s| < 1`` with peak value 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_section(bundle: BundleModel, center, radius: float, components, name: str | None = None) -> SectionField:
    """Compactly supported ``bump(dist(x, center) / radius) * components``."""
    geom = bundle.geometry
    center = np.asarray(center, dtype=float)
    comps = np.asarray(components, dtype=float).reshape(bundle.rank)

    def fn(x):
        return bump_profile(geom.distance(x, center) / radius)[:, None] * comps

    # the profile is positive on the open ball, so only the direction matters on the boundary
    violation = boundary_trace_violation(bundle, lambda y: np.broadcast_to(comps, (len(y), bundle.rank)), center, radius)
    touches = float(geom.normal_coordinate(center)) < radius
    compliant = (not touches) or violation <= 1e-8
    label = name or f"bump({center.tolist()}, r={radius}, {comps.tolist()})"
    return SectionField(label, bundle.rank, fn, geom, center, float(radius), compliant)


def constant_section(bundle: BundleModel, components, name: str | None = None, harmonic: str | None = None) -> SectionField:
    comps = np.asarray(components, dtype=float).reshape(bundle.rank)

    def fn(x):
        return np.broadcast_to(comps, (len(x), bundle.rank))

    violation = boundary_trace_violation(bundle, fn)
    return SectionField(name or f"const({comps.tolist()})", bundle.rank, fn, bundle.geometry,
                        compliant=violation <= 1e-8, harmonic=harmonic)


_FORM_KEY = re.compile(r"^dx\d+(\^dx\d+)*$")


def harmonic_section(bundle: BundleModel, key: str) -> SectionField:
    """Bounded harmonic sections known in closed form.

    ``"one"`` for scalar bundles with zero potential, ``"dx1"``, ``"dx1^dx2"``,
    ... (parallel forms) for form bundles on a half-space, and ``"plus"`` (a
    constant spinor in ``F_+``) for the spinor bundle.  Sections violating the
    boundary condition (``"dx{n}"``) are returned with ``compliant=False``.
    """
    geom = bundle.geometry
    if key == "one":
        if bundle.rank != 1 or bundle.constant_weitzenbock is None or np.any(bundle.constant_weitzenbock != 0):
            raise KeyError("'one' is harmonic only for scalar bundles with W = 0")
        return constant_section(bundle, [1.0], name="one", harmonic="one")
    if key == "plus":
        if bundle.name != "spinor2d":
            raise KeyError("'plus' is defined for the spinor bundle")
        comps = [1.0, 0.0] if bundle.params["orientation"] == 1 else [0.0, 1.0]
        return constant_section(bundle, comps, name="plus", harmonic="plus")
    if _FORM_KEY.match(key):
        if not (bundle.name.startswith("forms:") and isinstance(geom, HalfSpace)):
            raise KeyError(f"{key!r} is harmonic only for form bundles on a half-space")
        if bundle.params.get("potential", 0.0) != 0.0:
            raise KeyError("parallel forms are not harmonic with a nonzero potential")
        idx = tuple(sorted(int(s) - 1 for s in key.replace("dx", "").split("^")))
        p = bundle.params["degree"]
        basis = _subsets(geom.dim, p)
        if len(idx) != p or idx not in basis:
            raise KeyError(f"{key!r} is not a basis {p}-form in dimension {geom.dim}")
        comps = np.zeros(bundle.rank)
        comps[basis.index(idx)] = 1.0
        return constant_section(bundle, comps, name=key, harmonic=key)
    raise KeyError(f"no closed-form harmonic section {key!r}")


def make_bundle(geom: ModelGeometry, spec: str, **options) -> BundleModel:
    """Build a bundle from its config id (``scalar``, ``forms:p``, ``spinor2d``, ``generic``)."""
    if spec == "scalar":
        return scalar_bundle(geom, potential=options.get("potential", 0.0), robin=options.get("robin", 0.0))
    if spec.startswith("forms:"):
        return forms_bundle(geom, int(spec.split(":", 1)[1]), potential=options.get("potential", 0.0))
    if spec == "spinor2d":
        return spinor2d_bundle(geom, orientation=int(options.get("orientation", 1)))
    if spec == "generic":
        g = options.get("generic")
        if not g:
            raise KeyError("generic bundle requires a [generic] table")
        N = int(g["rank"])
        return generic_bundle(N, W=g.get("W", 0.0), S=g.get("S", 0.0), involution=g.get("I", 1.0),
                              c1=g.get("c1"), c2=g.get("c2"), geometry=geom)
    raise KeyError(f"unknown bundle {spec!r}")
