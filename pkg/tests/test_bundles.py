import numpy as np
import pytest

from bundleheat.bundles import (BoundaryContext, bump_section, compound_matrix, constant_section, forms_bundle,
                                generic_bundle, harmonic_section, lower_bounds, make_bundle, random_frames,
                                scalar_bundle, spinor2d_bundle)
from bundleheat.errors import BundleInvariantError
from bundleheat.geometry import DiskExterior2D, HalfSpace, Hemisphere2D


def _ctx(bundle, count=8, seed=0):
    geom = bundle.geometry
    rng = np.random.default_rng(seed)
    y = geom.sample_boundary(rng, count)
    return BoundaryContext.from_frames(geom, y, random_frames(geom, y, rng))


@pytest.mark.parametrize("p", [0, 1, 2])
def test_forms_involution_and_projections(geometry, p):
    b = forms_bundle(geometry, p)
    ctx = _ctx(b)
    inv = b.involution(ctx)
    assert np.allclose(inv @ inv, np.eye(b.rank))
    Pp, Pm = b.projections(ctx)
    assert np.allclose(Pp + Pm, np.eye(b.rank))
    assert np.allclose(Pp @ Pm, 0.0)
    S = b.robin(ctx)
    assert np.allclose(S @ Pm, 0.0, atol=1e-12)


def test_forms_constants():
    assert forms_bundle(DiskExterior2D(), 1).c2 == -1.0
    assert forms_bundle(Hemisphere2D(), 1).c1 == 1.0
    assert forms_bundle(HalfSpace(2), 1, potential=2.0).c1 == 2.0
    for geom in (HalfSpace(2), DiskExterior2D(), Hemisphere2D()):
        b = forms_bundle(geom, 1)
        lb = lower_bounds(b, count=200)
        assert not lb.violates(b.c1, b.c2)


def test_disk_one_form_robin_is_tangential_curvature():
    b = forms_bundle(DiskExterior2D(), 1)
    y = np.array([[1.0, 0.0]])
    ctx = BoundaryContext.from_frames(b.geometry, y, b.geometry.reference_frame(y))
    S = b.robin(ctx)[0]
    Pp, _ = b.projections(ctx)
    assert np.isclose(np.trace(S), -1.0)
    assert np.allclose(S, -Pp[0])


def test_compound_matrix_is_multiplicative(rng):
    A = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    B = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    for p in (1, 2, 3):
        assert np.allclose(compound_matrix(A @ B, p), compound_matrix(A, p) @ compound_matrix(B, p))


def test_spinor_involution_anticommutes_with_tangential_clifford():
    b = spinor2d_bundle(HalfSpace(2))
    y = np.array([[0.3, 0.0], [-2.0, 0.0]])
    ctx = BoundaryContext.from_frames(b.geometry, y, b.geometry.reference_frame(y))
    inv = b.involution(ctx)
    gamma_t = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(inv @ gamma_t + gamma_t @ inv, 0.0)
    assert np.allclose(harmonic_section(b, "plus")(np.zeros((1, 2))), [[1.0, 0.0]])


def test_generic_bundle_validation():
    with pytest.raises(BundleInvariantError):
        generic_bundle(2, W=np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(BundleInvariantError):
        generic_bundle(2, involution=np.array([[1.0, 0.0], [0.0, 2.0]]))
    with pytest.raises(BundleInvariantError):
        generic_bundle(2, S=np.eye(2), involution=np.diag([1.0, -1.0]))
    with pytest.raises(BundleInvariantError):
        generic_bundle(1, W=1.0, c1=2.0)
    b = generic_bundle(2, W=np.array([[2.0, 1.0], [1.0, 3.0]]))
    assert np.isclose(b.c1, (5 - np.sqrt(5)) / 2)


def test_trivial_boundary_flags():
    assert scalar_bundle(HalfSpace(2)).params["trivial_boundary"]
    assert not scalar_bundle(HalfSpace(2), robin=1.0).params["trivial_boundary"]
    assert not forms_bundle(HalfSpace(2), 1).params["trivial_boundary"]


def test_sections():
    b = forms_bundle(HalfSpace(2), 1)
    phi = bump_section(b, [0.0, 1.0], 0.5, [1.0, 2.0])
    vals = phi(np.array([[0.0, 1.0], [3.0, 3.0]]))
    assert vals[0, 1] == 2 * vals[0, 0] > 0
    assert np.all(vals[1] == 0)
    assert phi.compact
    assert not harmonic_section(b, "dx2").compliant
    assert harmonic_section(b, "dx1").compliant
    with pytest.raises(KeyError):
        harmonic_section(forms_bundle(HalfSpace(2), 1, potential=1.0), "dx1")
    one = constant_section(scalar_bundle(HalfSpace(2)), [1.0])
    assert np.all(one(np.zeros((3, 2))) == 1.0)


def test_make_bundle():
    g = HalfSpace(2)
    assert make_bundle(g, "forms:2").rank == 1
    b = make_bundle(g, "generic", generic={"rank": 2, "W": 2.0})
    assert b.c1 == 2.0
    with pytest.raises(KeyError):
        make_bundle(g, "tensor")


def test_boundary_factor_kills_dirichlet_part():
    b = forms_bundle(HalfSpace(2), 1)
    ctx = _ctx(b)
    F = b.boundary_factor(ctx, np.full(len(ctx), 0.1))
    _, Pm = b.projections(ctx)
    assert np.allclose(F @ Pm, 0.0)
