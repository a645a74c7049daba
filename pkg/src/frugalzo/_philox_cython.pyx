# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled Philox4x32-10 kernel.

Hot-loop twin of ``_philox_numpy.raw64``; see that module for the stream
contract. The two implementations must agree bit for bit, so only integer
arithmetic happens here.
"""

from libc.stdint cimport uint32_t, uint64_t

import numpy as np

cdef uint32_t M0 = 0xD2511F53u
cdef uint32_t M1 = 0xCD9E8D57u
cdef uint32_t W0 = 0x9E3779B9u
cdef uint32_t W1 = 0xBB67AE85u


cdef inline void _tick(uint64_t tick, uint32_t c2_init, uint32_t c3_init,
                       uint32_t key0, uint32_t key1,
                       uint64_t* lane0, uint64_t* lane1) noexcept nogil:
    cdef uint32_t c0 = <uint32_t>(tick & 0xFFFFFFFFu)
    cdef uint32_t c1 = <uint32_t>(tick >> 32)
    cdef uint32_t c2 = c2_init
    cdef uint32_t c3 = c3_init
    cdef uint32_t k0 = key0
    cdef uint32_t k1 = key1
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1, t0, t2
    cdef int r
    for r in range(10):
        p0 = (<uint64_t>M0) * c0
        p1 = (<uint64_t>M1) * c2
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>(p0 & 0xFFFFFFFFu)
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>(p1 & 0xFFFFFFFFu)
        t0 = hi1 ^ c1 ^ k0
        t2 = hi0 ^ c3 ^ k1
        c0 = t0
        c1 = lo1
        c2 = t2
        c3 = lo0
        k0 = k0 + W0
        k1 = k1 + W1
    lane0[0] = ((<uint64_t>c1) << 32) | c0
    lane1[0] = ((<uint64_t>c3) << 32) | c2


def raw64(seed, subsequence, offset, count):
    """Return the ``count`` uint64 outputs at [offset, offset + count)."""
    cdef uint64_t seed_u = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t sub_u = <uint64_t>(int(subsequence) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t off = <uint64_t>int(offset)
    cdef Py_ssize_t n = <Py_ssize_t>int(count)
    out = np.empty(n, dtype=np.uint64)
    if n == 0:
        return out
    cdef uint64_t[::1] buf = out
    cdef uint32_t c2_init = <uint32_t>(sub_u & 0xFFFFFFFFu)
    cdef uint32_t c3_init = <uint32_t>(sub_u >> 32)
    cdef uint32_t key0 = <uint32_t>(seed_u & 0xFFFFFFFFu)
    cdef uint32_t key1 = <uint32_t>(seed_u >> 32)
    cdef uint64_t tick = off >> 1
    cdef uint64_t lane0 = 0, lane1 = 0
    cdef Py_ssize_t i = 0
    with nogil:
        if off & 1:
            _tick(tick, c2_init, c3_init, key0, key1, &lane0, &lane1)
            buf[0] = lane1
            i = 1
            tick += 1
        while i + 1 < n:
            _tick(tick, c2_init, c3_init, key0, key1, &lane0, &lane1)
            buf[i] = lane0
            buf[i + 1] = lane1
            i += 2
            tick += 1
        if i < n:
            _tick(tick, c2_init, c3_init, key0, key1, &lane0, &lane1)
            buf[i] = lane0
    return out
