"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``GKYP_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("GKYP_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("compiled kernels disabled by GKYP_PURE_PYTHON")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def _c(a, ndim):
    a = np.ascontiguousarray(a, dtype=complex)
    if a.ndim != ndim:
        raise ValueError(f"expected {ndim}-D array, got shape {a.shape}")
    return a


def propagate(Phi, Gamma, x0, v, impl=None):
    """Linear recursion ``x[i+1] = Phi x[i] + Gamma v[i]`` from ``x[0] = x0``."""
    impl = impl or _impl
    v = _c(v, 2)
    Gamma = _c(Gamma, 2)
    if v.shape[1] != Gamma.shape[1]:
        raise ValueError("input width does not match Gamma")
    return impl.propagate(_c(Phi, 2), Gamma, _c(x0, 1), v)


def weighted_outer_sum(a, b, w, impl=None):
    impl = impl or _impl
    a, b = _c(a, 2), _c(b, 2)
    w = np.ascontiguousarray(w, dtype=float)
    if not (a.shape[0] == b.shape[0] == w.shape[0]):
        raise ValueError("sample counts differ")
    return impl.weighted_outer_sum(a, b, w)


def weighted_quadform_sum(z, M, w, impl=None):
    impl = impl or _impl
    z, M = _c(z, 2), _c(M, 2)
    w = np.ascontiguousarray(w, dtype=float)
    if z.shape[0] != w.shape[0] or M.shape != (z.shape[1], z.shape[1]):
        raise ValueError("shape mismatch")
    return complex(impl.weighted_quadform_sum(z, M, w))
