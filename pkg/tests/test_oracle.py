import math

import numpy as np
import pytest
from scipy.special import erf

from bundleheat.bundles import forms_bundle, scalar_bundle, bump_section, SectionField
from bundleheat.errors import NonCompliantSectionError, OracleConvergenceError
from bundleheat.geometry import HalfSpace, Hemisphere2D
from bundleheat.oracle import (QuadratureGrid, _converged, chart_quadrature, halfline_robin_expectation,
                               halfspace_forms_mass, hemisphere_kernel, images_kernel, kernel_integral,
                               quadratic_form_Q, radial_disk_exterior_pde, robin_pde_1d, self_test_rows,
                               semigroup_defect)

# reference values computed once from the closed forms and CN solvers
ROBIN_SIGMA1_T1_X05 = 0.746127
DISK_EXP_MOMENTS = {0.25: 1.47524, 0.5: 1.73039, 1.0: 2.17486}
HEMISPHERE_POLE_T05 = 0.34642


def test_images_kernel_value():
    expect = (math.exp(-0.03125) + math.exp(-0.28125)) / math.sqrt(2 * math.pi)
    assert np.isclose(images_kernel(1.0, 0.5, 0.25), expect)
    assert np.isclose(images_kernel(1.0, 0.5, 0.25, "dirichlet"),
                      (math.exp(-0.03125) - math.exp(-0.28125)) / math.sqrt(2 * math.pi))
    with pytest.raises(ValueError):
        images_kernel(1.0, -0.5, 0.25)


def test_robin_closed_form_limits():
    x = np.linspace(0, 3, 7)
    assert np.allclose(halfline_robin_expectation(x, 1.0, 0.0), 1.0)
    assert np.allclose(halfline_robin_expectation(x, 1.0, 1e8), erf(x / math.sqrt(2)), atol=1e-6)


def test_robin_cn_frozen():
    sol = robin_pde_1d(1.0, 1.0, 0.5)
    assert sol.order >= 1.9
    assert abs(float(sol.at(0.5)) - ROBIN_SIGMA1_T1_X05) < 1e-5
    assert abs(float(sol.at(0.5)) - halfline_robin_expectation(0.5, 1.0, 1.0)) < 1e-5


def test_stiff_robin_is_dirichlet():
    xs = np.linspace(0, 3, 31)
    assert np.max(np.abs(robin_pde_1d(1e4, 1.0, xs).at(xs) - erf(xs / math.sqrt(2)))) < 1e-3


@pytest.mark.parametrize("t", sorted(DISK_EXP_MOMENTS))
def test_disk_exponential_moment_frozen(t):
    sol = radial_disk_exterior_pde(1.0, t, 1.0)
    assert abs(float(sol.at(1.0)) - DISK_EXP_MOMENTS[t]) < 2e-5


def test_disk_zero_beta_is_one():
    assert np.isclose(float(radial_disk_exterior_pde(0.0, 1.0, 1.0).at(1.0)), 1.0)


def test_convergence_check_rejects_first_order():
    def solve(h):
        r = np.linspace(0, 1, 11)
        return r, np.full_like(r, 1.0 + h)

    with pytest.raises(OracleConvergenceError):
        _converged(solve, 0.5, 0.1)


def test_hemisphere_kernel_frozen_and_mass():
    pole = np.array([0.0, 0.0, 1.0])
    assert abs(float(hemisphere_kernel(0.5, pole, pole)) - HEMISPHERE_POLE_T05) < 1e-5
    g = Hemisphere2D()
    grid = chart_quadrature(g, [0.0, -math.pi], [math.pi / 2, math.pi], [200, 200])
    mass = kernel_integral(lambda x, y: hemisphere_kernel(0.5, x, y), pole, lambda y: np.ones(len(y)), grid)
    assert abs(mass - 1.0) < 1e-4
    assert np.isclose(float(hemisphere_kernel(20.0, pole, pole)), 1 / (2 * math.pi), atol=1e-6)


def test_semigroup_property_images():
    g, w = np.polynomial.legendre.leggauss(200)
    nodes = (10 * (g + 1), 10 * w)
    assert semigroup_defect(images_kernel, 0.4, 0.6, 0.3, 0.9, nodes) < 1e-4


def test_self_test_rows_all_pass():
    rows = self_test_rows()
    assert all(ok for *_, ok in rows)


def test_forms_mass_on_half_plane():
    m = halfspace_forms_mass(1.0, np.array([0.0, 0.5]), p=1, n=2)
    assert np.allclose(m, [1.0, erf(0.5 / math.sqrt(2))])


def test_quadrature_rules_integrate_polynomials():
    for rule in ("trapezoid", "midpoint", "gauss"):
        grid = QuadratureGrid.box([0.0, 0.0], [1.0, 2.0], [101, 101], rule=rule)
        assert np.isclose(np.sum(grid.weights * grid.points[:, 0] * grid.points[:, 1]), 1.0, atol=1e-4)


def test_quadratic_form_rejects_noncompliant():
    b = forms_bundle(HalfSpace(2), 1)
    grid = QuadratureGrid.box([-3.0, 0.0], [3.0, 3.0], [61, 31])
    bad = bump_section(b, [0.0, 0.0], 1.0, [0.0, 1.0])
    with pytest.raises(NonCompliantSectionError):
        quadratic_form_Q(bad, bad, b, grid)


def test_scalar_quadratic_form_gaussian():
    # Q(f, f) = int |grad f|^2 for f = exp(-|x|^2 / 2) on the upper half-plane equals pi / 2
    b = scalar_bundle(HalfSpace(2))
    grid = QuadratureGrid.box([-7.0, 0.0], [7.0, 7.0], [281, 141])
    f = SectionField("g", 1, lambda x: np.exp(-np.sum(x * x, axis=1) / 2)[:, None], b.geometry)
    assert np.isclose(quadratic_form_Q(f, f, b, grid), math.pi / 2, rtol=3e-3)
