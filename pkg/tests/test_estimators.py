import math

import numpy as np
import pytest
from scipy.special import erf

from bundleheat import estimators as est
from bundleheat.bundles import (bump_section, constant_section, forms_bundle, generic_bundle, harmonic_section,
                                scalar_bundle)
from bundleheat.errors import ConfigError, NonCompliantSectionError
from bundleheat.geometry import DiskExterior2D, HalfSpace
from bundleheat.oracle import QuadratureGrid, images_kernel

SQRT_2_OVER_PI = math.sqrt(2 / math.pi)


def test_batch_means_matches_iid_se(rng):
    x = rng.standard_normal(64000)
    m, se = est.batch_means(x, 32)
    assert np.isclose(m, x.mean())
    assert 0.7 < se / (x.std() / math.sqrt(len(x))) < 1.3


def test_estimate_within():
    e = est.Estimate(1.0, 0.1, 10)
    assert e.within(1.25)
    assert not e.within(1.5)
    assert e.within(1.5, rel=0.4)


def test_fingerprint_is_stable():
    a = est.fingerprint(x=np.array([1.0, 2.0]), t=1.0, cfg=est.EnsembleConfig(paths=64))
    b = est.fingerprint(t=1.0, x=np.array([1.0, 2.0]), cfg=est.EnsembleConfig(paths=64))
    assert a == b and len(a) == 16


def test_ensemble_config_validation():
    with pytest.raises(ConfigError):
        est.EnsembleConfig(paths=10, batches=32)


def test_semigroup_apply_robin(small_cfg):
    b = scalar_bundle(HalfSpace(1), robin=1.0)
    e = est.semigroup_apply(constant_section(b, [1.0]), [0.5], 1.0, b, small_cfg)
    from bundleheat.oracle import halfline_robin_expectation

    assert e.within(halfline_robin_expectation(0.5, 1.0, 1.0), k=4)


def test_semigroup_apply_rejects_noncompliant(small_cfg):
    b = forms_bundle(HalfSpace(2), 1)
    with pytest.raises(NonCompliantSectionError):
        est.semigroup_apply(harmonic_section(b, "dx2"), [0.0, 1.0], 1.0, b, small_cfg)


def test_semigroup_reproducible(small_cfg):
    b = forms_bundle(DiskExterior2D(), 1)
    phi = bump_section(b, [1.8, 0.0], 0.5, [1.0, 0.5])
    a = est.semigroup_apply(phi, [1.5, 0.0], 0.3, b, small_cfg)
    c = est.semigroup_apply(phi, [1.5, 0.0], 0.3, b, small_cfg)
    assert np.array_equal(a.value, c.value) and a.fingerprint == c.fingerprint


def test_kernel_histogram_mass_and_value(small_cfg):
    b = scalar_bundle(HalfSpace(1))
    h = est.kernel_estimate([0.5], 1.0, ([0.0], [8.0]), [32], b, small_cfg)
    assert h.mass().within(1.0)
    centres = h.centers()[0]
    ref = images_kernel(1.0, 0.5, centres)
    z = (h.value[:, 0, 0] - ref) / h.se[:, 0, 0]
    assert np.mean(np.abs(z[np.isfinite(z)]) < 3.5) > 0.9


def test_local_time_mean(small_cfg):
    e = est.local_time_moment([0.0], 1.0, 1, 0.0, HalfSpace(1), small_cfg)
    assert e.value == 1.0
    res = est._simulate([0.0], 1.0, scalar_bundle(HalfSpace(1)), small_cfg, n_paths=small_cfg.paths)
    m, se = est.batch_means(res.batch.lam)
    assert abs(m - SQRT_2_OVER_PI) < 4 * se + 0.01


def test_local_time_moments_disk(small_cfg):
    ests = est.local_time_moments([1.0, 0.0], [0.25, 0.5], 1, -1.0, DiskExterior2D(), small_cfg)
    assert [e.extra["t"] for e in ests] == [0.25, 0.5]
    assert abs(ests[1].value - 1.73039) < 0.05


def test_fit_exponential_recovers_constants():
    t = np.array([0.25, 0.5, 1.0])
    fit = est.fit_exponential(t, 1.3 * np.exp(0.5 * t), np.full(3, 1e-3))
    assert np.isclose(fit.K1, 1.3) and np.isclose(fit.K2, 0.5)


def test_stratify_weights_sum_to_quadrature():
    grid = QuadratureGrid.box([0.0], [1.0], [10], rule="midpoint")
    s = est.stratify(grid, np.ones(10, bool), 320, 32)
    sums = est._batch_sums(np.ones(320), s, 32)
    assert np.allclose(sums, 1.0)
    with pytest.raises(ConfigError):
        est.stratify(grid, np.ones(10, bool), 100, 32)


def test_conservation_dx1_is_zero(small_cfg):
    b = forms_bundle(HalfSpace(2), 1)
    phi = bump_section(b, [0.0, 1.0], 0.5, [1.0, 1.0])
    grid = QuadratureGrid.box([-0.5, 0.5], [0.5, 1.5], [8, 8], rule="midpoint")
    e = est.conservation_pairing(phi, harmonic_section(b, "dx1"), 0.5, grid, b, small_cfg)
    assert e.within(0.0)
    with pytest.raises(NonCompliantSectionError):
        est.conservation_pairing(phi, harmonic_section(b, "dx2"), 0.5, grid, b, small_cfg)
    ctrl = est.conservation_pairing(phi, harmonic_section(b, "dx2"), 0.5, grid, b, small_cfg, control=True)
    assert ctrl.value < -5 * ctrl.se


def test_domination_flat_potential(small_cfg):
    b = forms_bundle(HalfSpace(2), 1, potential=2.0)
    rows = est.domination_report([0.0, 0.5], [([-0.1, 0.4], [0.1, 0.6])], [0.5], b, small_cfg)
    r = rows[0]
    assert abs(r.ratio - math.exp(-0.5)) < 4 * r.ratio_se + 1e-12
    fit = est.fit_domination([est.DominationRow(None, t, 1, 0, 1, math.exp(-t), 0.01, math.nan, True)
                              for t in (0.25, 0.5, 1.0)])
    assert np.isclose(fit.C2, -1.0)
    assert np.isclose(fit.C1, 1.0 + 0.03 * math.e)  # envelope of ratio + 3 se


def test_l1_growth_generic(small_cfg):
    b = generic_bundle(2, W=2.0)
    phi = bump_section(b, [0.0, 1.0], 0.5, [1.0, 1.0])
    grid = QuadratureGrid.box([-0.5, 0.5], [0.5, 1.5], [8, 8], rule="midpoint")
    e = est.l1_growth(phi, 0.5, grid, ([-6.0, 0.0], [6.0, 7.0]), [24, 14], b, small_cfg)
    assert np.isclose(e.value, math.exp(-0.5) * est.l1_norm(phi, grid), rtol=1e-3)
    assert est.l1_bound_holds(e, est.DominationFit(1.0, -1.0, 0.0), 0.5, est.l1_norm(phi, grid))


def test_neumann_laplacian_1d():
    lap = est.neumann_laplacian_1d(lambda x: np.cos(x))
    x = np.array([0.0, 0.5, 1.0])
    assert np.allclose(lap(x), np.cos(x), atol=1e-5)


def test_intident_residual(small_cfg):
    phi = lambda x: np.exp(-((np.asarray(x)[:, 0] - 1.0) ** 2) / 0.02)  # noqa: E731
    xi = lambda x: np.exp(-np.asarray(x)[:, 0] ** 2 / 2) * (1 + np.asarray(x)[:, 0] ** 2)  # noqa: E731
    grid = QuadratureGrid.box([0.4], [1.6], [61], rule="midpoint")
    e = est.intident_check(phi, xi, 0.4, grid, small_cfg, n_tau=21)
    assert abs(e.value) <= 4 * e.se + 1e-3
