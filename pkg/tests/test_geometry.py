import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bundleheat.errors import NotOnBoundaryError, OutsideChartError, OutsideCollarError
from bundleheat.geometry import DiskExterior2D, HalfSpace, Hemisphere2D, make_geometry


def test_make_geometry_catalogue():
    assert make_geometry("half_space", 3) == HalfSpace(3)
    assert isinstance(make_geometry("disk_exterior"), DiskExterior2D)
    assert isinstance(make_geometry("hemisphere"), Hemisphere2D)
    with pytest.raises(KeyError):
        make_geometry("torus")
    with pytest.raises(ValueError):
        make_geometry("hemisphere", 3)


def test_chart_round_trip(geometry, rng):
    x = geometry.sample_points(rng, 50, max_r=1.0)
    q = geometry.to_chart(x)
    assert np.allclose(geometry.from_chart(q), x, atol=1e-12)


def test_collar_round_trip(geometry, rng):
    x = geometry.sample_points(rng, 50, max_r=0.5 * min(geometry.r0, 1.0))
    r, y = geometry.collar_coords(geometry.to_chart(x))
    assert np.all(r >= 0)
    assert np.allclose(geometry.from_collar(r, y), geometry.to_chart(x), atol=1e-12)
    assert np.allclose(geometry.normal_coordinate(x), r, atol=1e-12)


def test_reference_frames_orthonormal(geometry, rng):
    x = geometry.sample_points(rng, 20)
    E = geometry.reference_frame(x)
    gram = np.einsum("pai,paj->pij", E, E)
    assert np.allclose(gram, np.eye(geometry.dim), atol=1e-12)


def test_shape_operators():
    assert np.allclose(HalfSpace(2).shape_operator(np.zeros(2)).principal_curvatures, 0.0)
    disk = DiskExterior2D().shape_operator(np.array([1.0, 0.3]))
    assert np.allclose(disk.principal_curvatures, [-1.0])
    hemi = Hemisphere2D().shape_operator(np.array([math.pi / 2, 0.3]))
    assert np.allclose(hemi.principal_curvatures, [0.0])
    with pytest.raises(NotOnBoundaryError):
        HalfSpace(2).shape_operator(np.array([0.0, 0.5]))


def test_witnesses():
    assert DiskExterior2D().witnesses().shape_lower == -1.0
    assert not DiskExterior2D().witnesses().convex
    h = Hemisphere2D().witnesses()
    assert h.sectional_upper == 1.0 and h.ricci_lower == 1.0


def test_outside_errors():
    with pytest.raises(OutsideChartError):
        HalfSpace(2).metric(np.array([0.0, -1.0]))
    with pytest.raises(OutsideCollarError):
        Hemisphere2D().from_collar(3.0, np.array([math.pi / 2, 0.0]))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(-3.0, 3.0))
def test_hemisphere_christoffel_symbols(theta, phi):
    g = Hemisphere2D()
    G = g.christoffel_at(np.array([theta, phi]))
    assert np.isclose(G[0, 1, 1], -math.sin(theta) * math.cos(theta))
    assert np.isclose(G[1, 0, 1], math.cos(theta) / math.sin(theta))


def test_chart_cell_volume_matches_area():
    g = Hemisphere2D()
    vol = g.chart_cell_volume(np.array([0.0, -math.pi]), np.array([math.pi / 2, math.pi]))
    assert np.isclose(vol, 2 * math.pi)
