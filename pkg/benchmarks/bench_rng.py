"""Throughput comparison of the Philox backends.

The compiled kernel and the numpy fallback implement the same stream
contract bit for bit; this measures what the compiled core buys on the hot
path (raw counter outputs, and end-to-end Gaussian blocks as the optimizers
consume them).

Run: python benchmarks/bench_rng.py [--sizes 200 2000 1000000]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from frugalzo import _philox_numpy
from frugalzo._normal import ndtri

try:
    from frugalzo import _philox_cython
except ImportError:
    _philox_cython = None


def throughput(fn, size: int, min_seconds: float = 0.4) -> float:
    fn(size)  # warm up
    start = time.perf_counter()
    total = 0
    while time.perf_counter() - start < min_seconds:
        fn(size)
        total += size
    return total / (time.perf_counter() - start)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 2_000, 1_000_000])
    args = parser.parse_args()

    backends = [("numpy", _philox_numpy)]
    if _philox_cython is not None:
        backends.append(("cython", _philox_cython))
    else:
        print("compiled backend not built (run: python setup.py build_ext --inplace)")

    for seed, sub in ((42, 0),):
        for name, mod in backends[1:]:
            a = _philox_numpy.raw64(seed, sub, 1, 999)
            b = mod.raw64(seed, sub, 1, 999)
            assert np.array_equal(a, b), "backends disagree; benchmark aborted"

    print(f"{'size':>9} {'backend':>8} {'raw64 M/s':>10} {'gauss M/s':>10} {'speedup':>8}")
    for size in args.sizes:
        base_raw = None
        base_gauss = None
        for name, mod in backends:
            raw_rate = throughput(lambda n: mod.raw64(42, 0, 0, n), size)

            def gauss(n, raw64=mod.raw64):
                mantissa = (raw64(42, 0, 0, n) >> np.uint64(12)).astype(np.float64)
                return ndtri((mantissa + 0.5) * 2.0**-52)

            gauss_rate = throughput(gauss, size)
            if name == "numpy":
                base_raw, base_gauss = raw_rate, gauss_rate
                speed = ""
            else:
                speed = f"{raw_rate / base_raw:.1f}x/{gauss_rate / base_gauss:.1f}x"
            print(
                f"{size:>9} {name:>8} {raw_rate / 1e6:>10.1f} {gauss_rate / 1e6:>10.1f} {speed:>8}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
