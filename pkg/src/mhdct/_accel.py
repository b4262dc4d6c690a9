"""Compiled inner loops with pure-numpy fallbacks.

The compiled and fallback versions perform the same floating-point
operations in the same order, so results agree bitwise.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    if os.environ.get("MHDCT_DISABLE_NUMBA"):
        raise ImportError
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None


def _weno5_js_scalar(fm2, fm1, f0, fp1, fp2):
    # Jiang-Shu weights
    eps = 1.0e-6
    b0 = (13.0 / 12.0) * (fm2 - 2 * fm1 + f0) ** 2 + 0.25 * (fm2 - 4 * fm1 + 3 * f0) ** 2
    b1 = (13.0 / 12.0) * (fm1 - 2 * f0 + fp1) ** 2 + 0.25 * (fm1 - fp1) ** 2
    b2 = (13.0 / 12.0) * (f0 - 2 * fp1 + fp2) ** 2 + 0.25 * (3 * f0 - 4 * fp1 + fp2) ** 2
    a0 = 0.1 / (eps + b0) ** 2
    a1 = 0.6 / (eps + b1) ** 2
    a2 = 0.3 / (eps + b2) ** 2
    q0 = (2 * fm2 - 7 * fm1 + 11 * f0) / 6.0
    q1 = (-fm1 + 5 * f0 + 2 * fp1) / 6.0
    q2 = (2 * f0 + 5 * fp1 - fp2) / 6.0
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def _weno5_z_scalar(fm2, fm1, f0, fp1, fp2):
    # Z weights: d_r (1 + tau5 / (eps + beta_r)), tau5 = |beta_0 - beta_2|
    eps = 1.0e-6
    b0 = (13.0 / 12.0) * (fm2 - 2 * fm1 + f0) ** 2 + 0.25 * (fm2 - 4 * fm1 + 3 * f0) ** 2
    b1 = (13.0 / 12.0) * (fm1 - 2 * f0 + fp1) ** 2 + 0.25 * (fm1 - fp1) ** 2
    b2 = (13.0 / 12.0) * (f0 - 2 * fp1 + fp2) ** 2 + 0.25 * (3 * f0 - 4 * fp1 + fp2) ** 2
    tau = abs(b0 - b2)
    a0 = 0.1 * (1.0 + tau / (eps + b0))
    a1 = 0.6 * (1.0 + tau / (eps + b1))
    a2 = 0.3 * (1.0 + tau / (eps + b2))
    q0 = (2 * fm2 - 7 * fm1 + 11 * f0) / 6.0
    q1 = (-fm1 + 5 * f0 + 2 * fp1) / 6.0
    q2 = (2 * f0 + 5 * fp1 - fp2) / 6.0
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def _recursion_loop(J, decay, out):
    n, m = J.shape
    for j in range(m):
        out[0, j] = 0.0
    for i in range(1, n):
        for j in range(m):
            out[i, j] = decay * out[i - 1, j] + J[i, j]


if HAVE_NUMBA:
    _sig = ["float64(float64, float64, float64, float64, float64)"]
    weno5_js_kernel = numba.vectorize(_sig, cache=True)(_weno5_js_scalar)
    weno5_z_kernel = numba.vectorize(_sig, cache=True)(_weno5_z_scalar)
    _recursion_compiled = numba.njit(cache=True)(_recursion_loop)
else:  # pragma: no cover
    weno5_js_kernel = _weno5_js_scalar
    weno5_z_kernel = _weno5_z_scalar
    _recursion_compiled = None


def left_recursion(J: np.ndarray, decay: float) -> np.ndarray:
    """``I[0] = 0``, ``I[i] = decay * I[i-1] + J[i]`` along axis 0."""
    J = np.ascontiguousarray(J, dtype=np.float64)
    flat = J.reshape(J.shape[0], -1)
    out = np.empty_like(flat)
    if _recursion_compiled is not None:
        _recursion_compiled(flat, decay, out)
    else:  # pragma: no cover
        out[0] = 0.0
        for i in range(1, flat.shape[0]):
            out[i] = decay * out[i - 1] + flat[i]
    return out.reshape(J.shape)
