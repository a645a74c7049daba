"""frugalzo: forward-pass-only optimizers that rebuild Adam-style moments
from cached PRNG states instead of storing them."""

from .rng import BACKEND, RngState, gaussian_block, rng_init, rng_jump

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "RngState",
    "gaussian_block",
    "rng_init",
    "rng_jump",
    "__version__",
]
