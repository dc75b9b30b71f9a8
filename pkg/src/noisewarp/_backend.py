"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback
takes over. ``NOISEWARP_PURE_PYTHON=1`` forces the fallback.
"""
import contextlib
import os
import types

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

COMPILED_AVAILABLE = _compiled is not None

if os.environ.get("NOISEWARP_PURE_PYTHON", "").strip() not in ("", "0") or _compiled is None:
    kernels: types.ModuleType = _pykernels
else:
    kernels = _compiled


def name() -> str:
    return "compiled" if kernels is _compiled else "python"


def get(which: str) -> types.ModuleType:
    if which == "python":
        return _pykernels
    if which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; reinstall with Cython available")
        return _compiled
    raise ValueError(f"unknown backend {which!r}")


def set_backend(which: str) -> None:
    global kernels
    kernels = get(which)


@contextlib.contextmanager
def use(which: str):
    """Temporarily switch the active kernels."""
    global kernels
    prev = kernels
    kernels = get(which)
    try:
        yield kernels
    finally:
        kernels = prev
