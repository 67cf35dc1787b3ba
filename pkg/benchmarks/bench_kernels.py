"""Time the finite-volume right-hand side on both backends.

Usage: ``python benchmarks/bench_kernels.py [--cells 1024 4096 ...] [--repeat 50]``
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from rollwave import _kernels


def state(n: int):
    x = (np.arange(n) + 0.5) / n
    h = 1.0 + 0.3 * np.sin(2 * np.pi * x)
    return h, h * (1.0 + 0.1 * np.cos(2 * np.pi * x))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, nargs="+", default=[1024, 4096, 16384, 65536])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--limiter", default="none", choices=sorted(_kernels.LIMITERS))
    args = ap.parse_args()
    backends = ["numpy"] + (["numba"] if _kernels.BACKEND == "numba" else [])
    print(f"{'cells':>8} " + " ".join(f"{b + ' [us]':>14}" for b in backends) + "   speedup")
    for n in args.cells:
        h, q = state(n)
        times = []
        for b in backends:
            _kernels.explicit_rhs(h, q, 2.5, 1.0 / n, args.limiter, backend=b)  # warm-up/JIT
            t = timeit.timeit(lambda: _kernels.explicit_rhs(h, q, 2.5, 1.0 / n, args.limiter,
                                                            backend=b), number=args.repeat)
            times.append(1e6 * t / args.repeat)
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) == 2 else "     n/a"
        print(f"{n:>8} " + " ".join(f"{t:>14.1f}" for t in times) + "  " + speed)


if __name__ == "__main__":
    main()
