"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when
``HSL_PURE_PYTHON`` is set to a non-empty value other than ``0``) the numpy
fallback is used.  Both backends share the counter-based RNG layout, so they
agree up to last-ulp differences between the C math library and numpy.
"""

import os

from . import _fallback


def _load_compiled():
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
_force_python = os.environ.get("HSL_PURE_PYTHON", "") not in ("", "0")

if _compiled is not None and not _force_python:
    _impl = _compiled
    BACKEND = "cython"
else:
    _impl = _fallback
    BACKEND = "python"

counter_normals = _impl.counter_normals
em_linear = _impl.em_linear


def get_backend(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"`` explicitly."""
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built (pip install -e . to build)")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None
