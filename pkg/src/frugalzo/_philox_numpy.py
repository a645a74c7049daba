"""Pure-numpy Philox4x32-10 counter-based generator.

Fallback twin of the compiled kernel in ``_philox_cython``. Both backends
implement the same contract and must agree bit for bit:

    raw64(seed, subsequence, offset, count) -> uint64 ndarray

Output ``j`` of a stream is a pure function of (seed, subsequence, j): counter
tick ``j >> 1`` is run through ten Philox rounds, and the four 32-bit words are
packed into two 64-bit lanes, ``(y1 << 32 | y0, y3 << 32 | y2)``. No internal
state exists, which is what makes mid-stream jumps exact.

The construction is self-consistent only; matching cuRAND output bit for bit
is a non-goal.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10


def raw64(seed: int, subsequence: int, offset: int, count: int) -> np.ndarray:
    """Return the ``count`` uint64 outputs at [offset, offset + count)."""
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    first_tick = offset >> 1
    last_tick = (offset + count - 1) >> 1
    n = last_tick - first_tick + 1

    ticks = np.arange(first_tick, last_tick + 1, dtype=np.uint64)
    c0 = ticks & _MASK32
    c1 = ticks >> _SHIFT32
    c2 = np.full(n, subsequence & 0xFFFFFFFF, dtype=np.uint64)
    c3 = np.full(n, (subsequence >> 32) & 0xFFFFFFFF, dtype=np.uint64)
    k0 = np.uint64(seed & 0xFFFFFFFF)
    k1 = np.uint64((seed >> 32) & 0xFFFFFFFF)

    for _ in range(_ROUNDS):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32

    lanes = np.empty(2 * n, dtype=np.uint64)
    lanes[0::2] = (c1 << _SHIFT32) | c0
    lanes[1::2] = (c3 << _SHIFT32) | c2

    start = offset - 2 * first_tick  # 0 or 1
    return lanes[start : start + count]
