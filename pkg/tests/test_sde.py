import math

import numpy as np
import pytest

from bundleheat.bundles import forms_bundle, generic_bundle, scalar_bundle
from bundleheat.errors import ConfigError
from bundleheat.geometry import DiskExterior2D, HalfSpace, Hemisphere2D
from bundleheat.sde import StepConfig, local_time_increment, run_ensemble, simulate_path, step


def test_step_config_validation():
    with pytest.raises(ConfigError):
        StepConfig(dt=0.0)
    with pytest.raises(ConfigError):
        StepConfig(dt=1e-3, scheme="euler")
    with pytest.raises(ConfigError):
        StepConfig(dt=0.5).check_geometry(Hemisphere2D())
    assert StepConfig(dt=0.01).n_steps(1.0) == 100


def test_local_time_increment_exact_is_nonnegative(rng):
    r = rng.uniform(0, 0.05, 10000)
    db = rng.standard_normal(10000) * math.sqrt(1e-3)
    r_new, dlam = local_time_increment(r, db, 1e-3, rng=rng)
    assert np.all(r_new >= -1e-15)
    assert np.all(dlam >= 0)
    r_o, dlam_o = local_time_increment(r, db, 1e-3, scheme="overshoot", unif=np.ones_like(r))
    # the bridge minimum lies below the endpoint, so the exact increment dominates
    assert np.all(dlam + 1e-15 >= dlam_o)


def test_interior_free_motion():
    cfg = StepConfig(dt=1e-2, seed=1)
    res = run_ensemble([0.0, 50.0], 1.0, HalfSpace(2), scalar_bundle(HalfSpace(2)), cfg, n_paths=20000)
    x = res.batch.x
    assert np.all(res.batch.lam == 0)
    assert abs(x[:, 0].mean()) < 0.03
    assert abs(x[:, 0].var() - 1.0) < 0.05


def test_thread_count_does_not_change_results():
    g = HalfSpace(2)
    b = forms_bundle(g, 1)
    cfg = StepConfig(dt=1e-2, seed=5)
    a = run_ensemble([0.0, 0.1], 0.5, g, b, cfg, n_paths=600, block_size=256, threads=1)
    c = run_ensemble([0.0, 0.1], 0.5, g, b, cfg, n_paths=600, block_size=256, threads=3)
    assert np.array_equal(a.batch.x, c.batch.x)
    assert np.array_equal(a.batch.M, c.batch.M)


def test_simulate_path_matches_ensemble_path_zero():
    g = DiskExterior2D()
    b = forms_bundle(g, 1)
    cfg = StepConfig(dt=1e-2, seed=9)
    single = simulate_path([1.2, 0.0], 0.3, g, b, cfg)
    ens = run_ensemble([1.2, 0.0], 0.3, g, b, cfg, n_paths=1)
    assert np.allclose(single.x, ens.batch.x[0])
    assert np.isclose(single.lam, ens.batch.lam[0])


def test_single_step_api():
    g = HalfSpace(2)
    b = scalar_bundle(g)
    state = simulate_path([0.0, 0.5], 0.0, g, b, StepConfig(dt=1e-2))
    new = step(state, g, b, StepConfig(dt=1e-2), np.random.default_rng(0))
    assert new.x[1] >= 0 and new.lam >= 0


def test_snapshot_times_must_lie_on_grid():
    g = HalfSpace(1)
    with pytest.raises(ConfigError):
        run_ensemble([0.5], 1.0, g, scalar_bundle(g), StepConfig(dt=0.1), n_paths=4, record_times=[0.55])


def test_paths_stay_in_domain(geometry):
    b = forms_bundle(geometry, 1)
    x0 = geometry.sample_boundary(np.random.default_rng(0), 1)[0]
    res = run_ensemble(x0, 0.2, geometry, b, StepConfig(dt=1e-3, seed=2), n_paths=2000)
    assert np.all(geometry.normal_coordinate(res.batch.x) >= -1e-12)
    assert res.batch.lam.mean() > 0
    E = res.batch.frame
    assert np.allclose(np.einsum("pai,paj->pij", E, E), np.eye(2), atol=1e-10)


def test_norm_bound_noncommuting_generic():
    W = np.array([[2.0, 1.0], [1.0, 3.0]])
    S = np.array([[0.5, 0.3], [0.3, 1.5]])
    b = generic_bundle(2, W=W, S=S)
    res = run_ensemble([0.0, 0.1], 0.5, b.geometry, b, StepConfig(dt=1e-3, seed=4), n_paths=2000)
    norms = np.linalg.norm(res.batch.M, 2, axis=(1, 2))
    bound = np.exp(-0.5 * b.c1 * 0.5 - b.c2 * res.batch.lam)
    assert np.all(norms <= bound * (1 + 1e-8))


def test_inverse_tracking():
    b = generic_bundle(2, W=np.array([[2.0, 1.0], [1.0, 3.0]]), S=np.diag([0.5, 1.0]))
    res = run_ensemble([0.0, 0.1], 0.2, b.geometry, b, StepConfig(dt=1e-2, seed=4), n_paths=50, track_inverse=True)
    prod = res.batch.M @ res.batch.Minv
    assert np.allclose(prod, np.eye(2), atol=1e-10)
