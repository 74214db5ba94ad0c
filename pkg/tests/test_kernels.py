import subprocess
import sys

import numpy as np
import pytest

from bundleheat import _pykernels, kernels


@pytest.fixture
def cy():
    if "cython" not in kernels.BACKENDS:
        pytest.skip("compiled extension not built")
    return kernels.get_backend("cython")


def test_fallback_when_extension_missing():
    code = ("import sys; sys.modules['bundleheat._ckernels'] = None; "
            "from bundleheat import kernels; print(kernels.BACKEND, sorted(kernels.BACKENDS))")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert out.split()[0] == "python" and "cython" not in out


@pytest.mark.parametrize("exact", [True, False])
def test_reflect_1d_equivalence(cy, rng, exact):
    r = rng.uniform(0, 0.1, 1000)
    incr = rng.standard_normal(1000) * 0.03
    u = 1.0 - rng.random(1000)
    a = _pykernels.reflect_1d(r, incr, u, 1e-3, exact)
    b = cy.reflect_1d(r, incr, u, 1e-3, exact)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=0, atol=1e-14)


def test_sphere_step_equivalence(cy, rng):
    x = rng.standard_normal((500, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    E = _pykernels._orthonormalize(x, rng.standard_normal((500, 3, 2)))
    db = rng.standard_normal((500, 2)) * 0.05
    xa, Ea = _pykernels.sphere_step(x, E, db)
    xb, Eb = cy.sphere_step(x, E, db)
    assert np.allclose(xa, xb, atol=1e-13)
    assert np.allclose(Ea, Eb, atol=1e-13)


def test_bin_accumulate_equivalence(cy, rng):
    idx = rng.integers(-1, 20, 2000)
    w = rng.standard_normal((2000, 3))
    assert np.allclose(_pykernels.bin_accumulate(idx, w, 20), cy.bin_accumulate(idx, w, 20), atol=1e-12)


def test_python_backend_selectable():
    assert kernels.get_backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_sphere_transport_preserves_orthonormality(rng):
    x = rng.standard_normal((100, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    E = _pykernels._orthonormalize(x, rng.standard_normal((100, 3, 2)))
    x_new, E_new = _pykernels.sphere_step(x, E, rng.standard_normal((100, 2)) * 0.1)
    assert np.allclose(np.einsum("pai,paj->pij", E_new, E_new), np.eye(2), atol=1e-12)
    assert np.allclose(np.einsum("pa,pai->pi", x_new, E_new), 0.0, atol=1e-12)
