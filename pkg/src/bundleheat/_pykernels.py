"""Pure numpy implementations of the path-stepping kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used
when the extension is unavailable or ``BUNDLEHEAT_BACKEND=python``.
"""
import numpy as np


def reflect_1d(r, incr, unif, dt, exact):
    """One step of a reflected motion in the normal coordinate.

    ``incr`` is the free increment over the step and ``unif`` a uniform
    variate in (0, 1].  With ``exact`` the minimum of the Brownian bridge
    from 0 to ``incr`` is sampled and the Skorokhod regulator increment is
    ``max(0, -r - min)``; otherwise only the endpoint is inspected
    (projection onto the boundary).  Returns ``(r_new, dlam)``.
    """
    r = np.asarray(r, dtype=float)
    incr = np.asarray(incr, dtype=float)
    if exact:
        low = 0.5 * (incr - np.sqrt(incr * incr - 2.0 * dt * np.log(unif)))
    else:
        low = np.minimum(incr, 0.0)
    dlam = np.maximum(-r - low, 0.0)
    return r + incr + dlam, dlam


def _orthonormalize(x, E):
    E = E - np.einsum("pa,pai->pi", x, E)[:, None, :] * x[:, :, None]
    e1 = E[:, :, 0] / np.linalg.norm(E[:, :, 0], axis=1, keepdims=True)
    e2 = E[:, :, 1] - np.sum(e1 * E[:, :, 1], axis=1, keepdims=True) * e1
    e2 = e2 / np.linalg.norm(e2, axis=1, keepdims=True)
    return np.stack([e1, e2], axis=-1)


def sphere_transport(x, x_new, E):
    """Parallel transport of tangent frames along great-circle arcs ``x -> x_new``."""
    x = np.asarray(x, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    coef = np.einsum("pa,pai->pi", x_new, E) / (1.0 + np.sum(x * x_new, axis=1))[:, None]
    E_new = E - coef[:, None, :] * (x + x_new)[:, :, None]
    return _orthonormalize(x_new, E_new)


def sphere_step(x, E, db):
    """Geodesic step on the unit sphere along ``E @ db`` with frame transport."""
    x = np.asarray(x, dtype=float)
    v = np.einsum("pai,pi->pa", E, db)
    s = np.linalg.norm(v, axis=1)
    safe = np.where(s > 0.0, s, 1.0)
    x_new = np.cos(s)[:, None] * x + (np.sin(s) / safe)[:, None] * v
    x_new /= np.linalg.norm(x_new, axis=1, keepdims=True)
    return x_new, sphere_transport(x, x_new, E)


def bin_accumulate(index, weights, nbins):
    """Sum rows of ``weights`` into ``nbins`` bins; negative indices are skipped."""
    index = np.asarray(index)
    weights = np.asarray(weights, dtype=float)
    keep = index >= 0
    idx = index[keep]
    w = weights[keep]
    out = np.empty((nbins, weights.shape[1]))
    for k in range(weights.shape[1]):
        out[:, k] = np.bincount(idx, weights=w[:, k], minlength=nbins)
    return out
