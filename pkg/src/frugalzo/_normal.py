"""Inverse standard-normal CDF (Acklam's rational approximation).

Shared by both generator backends so Gaussian streams are bit-identical
regardless of which one produced the underlying uniforms. Relative error is
below 1.15e-9 over (0, 1), which is far tighter than anything the optimizers
or the statistical tests resolve.
"""

from __future__ import annotations

import numpy as np

_A = (
    -3.969683028665376e01,
    2.209460984245205e02,
    -2.759285104469687e02,
    1.383577518672690e02,
    -3.066479806614716e01,
    2.506628277459239e00,
)
_B = (
    -5.447609879822406e01,
    1.615858368580409e02,
    -1.556989798598866e02,
    6.680131188771972e01,
    -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e00,
    -2.549732539343734e00,
    4.374664141464968e00,
    2.938163982698783e00,
)
_D = (
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e00,
    3.754408661907416e00,
)

_P_LOW = 0.02425


def _tail(q: np.ndarray) -> np.ndarray:
    num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
    den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    return num / den


def _central(u: np.ndarray) -> np.ndarray:
    r = u - 0.5
    s = r * r
    num = ((((_A[0] * s + _A[1]) * s + _A[2]) * s + _A[3]) * s + _A[4]) * s + _A[5]
    den = ((((_B[0] * s + _B[1]) * s + _B[2]) * s + _B[3]) * s + _B[4]) * s + 1.0
    return r * num / den


def ndtri(u: np.ndarray) -> np.ndarray:
    """Map uniforms in the open interval (0, 1) to standard normals."""
    u = np.asarray(u, dtype=np.float64)

    lo = u < _P_LOW
    hi = u > 1.0 - _P_LOW
    any_lo = lo.any()
    any_hi = hi.any()
    # ~95% of mass is central; skip the masked branches when they are empty
    if not any_lo and not any_hi:
        return _central(u)

    out = np.empty_like(u)
    mid = ~(lo | hi)
    out[mid] = _central(u[mid])
    if any_lo:
        out[lo] = _tail(np.sqrt(-2.0 * np.log(u[lo])))
    if any_hi:
        out[hi] = -_tail(np.sqrt(-2.0 * np.log(1.0 - u[hi])))
    return out
