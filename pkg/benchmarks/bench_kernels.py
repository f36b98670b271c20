"""Time the hot kernels under each available backend.

The package ships the same three kernels twice: numba-jitted and pure
numpy. This script times representative workloads under both and prints a
table, so regressions in either path (or a numba upgrade changing the
balance) are easy to spot. Run from a checkout:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9

Timings are best-of-N wall clock; the first call per backend is discarded
so numba's compilation cost never pollutes the numbers.
"""

import argparse
import time

import numpy as np

from stepcarve import backend, numerics


def best_of(fn, repeats):
    fn()  # discard: jit compilation, cache warmup
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def workloads(rng):
    pow2 = rng.normal(size=(32, 32, 32)) + 1j * rng.normal(size=(32, 32, 32))
    mixed = rng.normal(size=(24, 24, 24)) + 1j * rng.normal(size=(24, 24, 24))
    rows = rng.normal(size=(64, 256)) + 1j * rng.normal(size=(64, 256))
    feats = rng.normal(size=(200_000, 16))
    starts = np.sort(rng.choice(feats.shape[0] - 1, size=4095, replace=False) + 1)
    edges = np.concatenate([[0], starts, [feats.shape[0]]]).astype(np.int64)
    return [
        ("fft_nd 32^3 (radix-2)", lambda: numerics.fft_nd(pow2)),
        ("fft_nd 24^3 (chirp-z)", lambda: numerics.fft_nd(mixed)),
        ("dft_batch 64x256", lambda: backend.kernels().dft_batch(rows, False)),
        ("binned_max 200k/4k bins", lambda: backend.kernels().binned_max(feats, edges)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="best-of repeats")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    cases = workloads(np.random.default_rng(args.seed))
    names = backend.available_backends()
    results = {}
    for name in names:
        backend.set_backend(name)
        for label, fn in cases:
            results[(label, name)] = best_of(fn, args.repeats)

    both = "numba" in names and "numpy" in names
    width = max(len(label) for label, _ in cases)
    header = f"{'kernel':<{width}}  " + "".join(f"{n + ' (ms)':>14}" for n in names)
    if both:
        header += f"{'numba gain':>12}"
    print(header)
    print("-" * len(header))
    for label, _ in cases:
        row = f"{label:<{width}}  "
        row += "".join(f"{results[(label, n)] * 1e3:>14.3f}" for n in names)
        if both:
            gain = results[(label, "numpy")] / results[(label, "numba")]
            row += f"{gain:>12.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
