"""Numerical kernels with a compiled fast path.

The Cython module ``_kernels`` is used when it was built; otherwise the
numpy implementations in ``_fallback`` are used. Set ``OTGAMES_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("OTGAMES_PURE_PYTHON", "") not in ("", "0"):
    _kernels = None
else:
    try:
        from . import _kernels
    except ImportError:
        _kernels = None

BACKEND = "cython" if _kernels is not None else "python"

fp_rhs = (_kernels or _fallback).fp_rhs
integrate_matrix = (_kernels or _fallback).integrate_matrix
dopri_integrate = _fallback.dopri_integrate
TIE_BAND = _fallback.TIE_BAND
STATUS_OK = _fallback.STATUS_OK
STATUS_UNDERFLOW = _fallback.STATUS_UNDERFLOW
STATUS_MAX_STEPS = _fallback.STATUS_MAX_STEPS


def is_compiled() -> bool:
    return _kernels is not None


__all__ = [
    "BACKEND",
    "fp_rhs",
    "integrate_matrix",
    "dopri_integrate",
    "is_compiled",
]
