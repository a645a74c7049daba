"""Deterministic counter-based Gaussian stream with exact capture and jump.

A stream is addressed by (seed, subsequence), both 64-bit, and a position in
it by a 64-bit ``offset`` counting draws consumed. Draw ``i`` is a pure
function of (seed, subsequence, i), so a captured :class:`RngState` can be
restored, jumped, or handed to another thread and will continue the stream
bit-exactly. There is no hidden state: in particular no spare-value caching
survives between calls.

Consumption constant: one Gaussian consumes exactly ONE counter slot (a 64-bit
Philox lane, thinned to 52 bits and mapped through the inverse normal CDF).
Offsets therefore coincide for raw, uniform, and Gaussian draws, which keeps
jump arithmetic trivial.

The Philox core is provided by a compiled extension when available and by a
pure-numpy twin otherwise; ``BACKEND`` names the one in use and
``FRUGALZO_FORCE_NUMPY=1`` forces the fallback. Both produce identical bits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from ._normal import ndtri

if os.environ.get("FRUGALZO_FORCE_NUMPY"):
    from . import _philox_numpy as _core

    BACKEND = "numpy"
else:
    try:
        from . import _philox_cython as _core  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _philox_numpy as _core

        BACKEND = "numpy"

_UINT64_MAX = 2**64 - 1

# Gaussians consumed per counter slot; documented contract, do not change.
DRAWS_PER_GAUSSIAN = 1

_GRID = 2.0**-52


class ExhaustedStreamError(RuntimeError):
    """Raised when a draw would advance the 64-bit offset past its range."""


@dataclass(frozen=True)
class RngState:
    """Captureable position in a (seed, subsequence) stream."""

    seed: int
    subsequence: int = 0
    offset: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "subsequence", "offset"):
            value = getattr(self, name)
            if not (0 <= value <= _UINT64_MAX):
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {value}")


def rng_init(seed: int, subsequence: int = 0) -> RngState:
    """State at the start of the (seed, subsequence) stream."""
    return RngState(seed=seed, subsequence=subsequence, offset=0)


def rng_jump(state: RngState, new_offset: int) -> RngState:
    """State as if exactly ``new_offset`` draws had been consumed from the start."""
    return replace(state, offset=new_offset)


def _advance(state: RngState, count: int) -> RngState:
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    if state.offset + count > _UINT64_MAX:
        raise ExhaustedStreamError(
            f"offset {state.offset} + {count} draws exceeds the 64-bit counter"
        )
    return RngState(state.seed, state.subsequence, state.offset + count)


def raw64_block(state: RngState, count: int) -> tuple[np.ndarray, RngState]:
    """``count`` raw uint64 outputs and the advanced state."""
    new_state = _advance(state, count)
    values = _core.raw64(state.seed, state.subsequence, state.offset, count)
    return values, new_state


def uniform_block(state: RngState, count: int) -> tuple[np.ndarray, RngState]:
    """``count`` uniforms on the open interval (0, 1) and the advanced state.

    Each uniform is the midpoint (m + 0.5) * 2**-52 of a 52-bit lattice cell,
    built with exact float operations so both backends agree bitwise.
    """
    raw, new_state = raw64_block(state, count)
    mantissa = (raw >> np.uint64(12)).astype(np.float64)
    return (mantissa + 0.5) * _GRID, new_state


def gaussian_block(state: RngState, count: int) -> tuple[np.ndarray, RngState]:
    """``count`` standard normals and the advanced state.

    Draw ``i`` of the returned block equals draw ``state.offset + i`` of the
    stream no matter how generation is chunked.
    """
    uniforms, new_state = uniform_block(state, count)
    return ndtri(uniforms), new_state
