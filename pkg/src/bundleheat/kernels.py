"""Backend selection for the path-stepping kernels.

The compiled extension is used when it imports; the numpy fallback is used
otherwise, or when the environment variable ``BUNDLEHEAT_BACKEND`` is set to
``python``.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def get_backend(name=None):
    """Kernel module for ``name`` (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    return BACKENDS[name]


def _select():
    wanted = os.environ.get("BUNDLEHEAT_BACKEND", "").strip().lower()
    if wanted:
        return wanted, get_backend(wanted)
    if _ckernels is not None:
        return "cython", _ckernels
    return "python", _pykernels


BACKEND, _active = _select()

reflect_1d = _active.reflect_1d
sphere_step = _active.sphere_step
sphere_transport = _active.sphere_transport
bin_accumulate = _active.bin_accumulate

__all__ = ["BACKEND", "BACKENDS", "get_backend", "reflect_1d", "sphere_step", "sphere_transport",
           "bin_accumulate"]
