"""Time the numba and numpy variants of each pipeline kernel.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both variants are called in the same process (independent of
ATOMSQUEEZE_DISABLE_NUMBA); the numba timings exclude the first, compiling call.
Workloads match one trapped acquisition of the desk-scale round trip.
"""
import argparse
import time

import numpy as np

from atomsqueeze._accel import HAVE_NUMBA, backend
from atomsqueeze.pipeline.kernels import KERNELS


def workloads(rng):
    blocks = rng.normal(0.0, 400.0, (88, 20000))
    spectra = np.fft.rfft(blocks[:16, :10000].repeat(11, axis=0), axis=1)
    samples = rng.normal(0.0, 400.0, 2_000_000)
    return {
        "lagged_autocorr": (blocks, 200),
        "power_moments": (spectra, 1e-4),
        "quantize": (samples, 14),
        "block_variance": (samples, 20000),
    }


def best_of(func, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    loads = workloads(rng)
    print(f"active backend: {backend()}")
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (nb, npy) in KERNELS.items():
        call = loads[name]
        t_np = best_of(npy, call, args.repeat)
        if HAVE_NUMBA:
            nb(*call)  # compile
            t_nb = best_of(nb, call, args.repeat)
            print(f"{name:<18}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>10.2f}")
        else:
            print(f"{name:<18}{'n/a':>12}{t_np * 1e3:>12.2f}{'':>10}")


if __name__ == "__main__":
    main()
