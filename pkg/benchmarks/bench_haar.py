"""Compare the compiled and pure-numpy Haar kernels.

Runs the full 4-level analysis/synthesis pair on square complex images and
reports per-call timings for both backends, plus a correctness cross-check.

Usage: python3 benchmarks/bench_haar.py [--sizes 128 256 512] [--repeats 50]
"""

import argparse
import time

import numpy as np

from dvdamp import _haar_py
from dvdamp.wavelet import HAAR_BACKEND, SubbandLayout, haar_forward, haar_inverse

try:
    from dvdamp import _haar_cy
except ImportError:
    _haar_cy = None


def run_pair(kernels, image, levels=4):
    """One analysis + synthesis round trip using the given kernel module."""
    out = np.array(image, dtype=complex)
    n = image.shape[0]
    sizes = [n >> j for j in range(levels)]
    for size in sizes:
        out[:size, :size] = kernels.forward_level(out[:size, :size])
    for size in reversed(sizes):
        out[:size, :size] = kernels.inverse_level(out[:size, :size])
    return out


def bench(kernels, image, repeats):
    run_pair(kernels, image)  # warm-up
    t0 = time.perf_counter()
    for _ in range(repeats):
        run_pair(kernels, image)
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512])
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    print(f"active backend: {HAAR_BACKEND}")
    backends = [("numpy", _haar_py)]
    if _haar_cy is not None:
        backends.append(("cython", _haar_cy))
    else:
        print("cython kernels not built; benchmarking numpy only")

    rng = np.random.default_rng(0)
    print(f"{'size':>6} " + "".join(f"{name + ' (ms)':>14}" for name, _ in backends)
          + ("{:>10}".format("speedup") if len(backends) == 2 else ""))
    for size in args.sizes:
        image = rng.standard_normal((size, size)) + 1j * rng.standard_normal(
            (size, size)
        )
        # correctness cross-check between backends before timing
        if len(backends) == 2:
            a = run_pair(backends[0][1], image)
            b = run_pair(backends[1][1], image)
            assert np.abs(a - b).max() < 1e-12, "backend outputs disagree"
        times = [bench(mod, image, args.repeats) for _, mod in backends]
        row = f"{size:>6} " + "".join(f"{t * 1e3:>14.3f}" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>10.2f}x"
        print(row)

    # end-to-end sanity: the public transform round-trips under the active
    # backend at machine precision
    layout = SubbandLayout.create(args.sizes[0], args.sizes[0])
    x = rng.standard_normal((args.sizes[0], args.sizes[0])) + 0j
    err = np.abs(haar_inverse(haar_forward(x, layout=layout)) - x).max()
    print(f"round-trip max error ({HAAR_BACKEND}): {err:.3e}")


if __name__ == "__main__":
    main()
