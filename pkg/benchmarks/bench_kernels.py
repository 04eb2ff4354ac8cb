"""Compare the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--size 64] [--angles 40] [--repeat 20]

Prints the median wall time per call for each backend and the largest
absolute difference between their outputs.
"""
import argparse
import statistics
import time

import numpy as np

from inr_forge import _kernels_py
from inr_forge.operators import RadonGeometry, default_detectors, shepp_logan

try:
    from inr_forge import _kernels as _compiled
except ImportError:
    _compiled = None


def _median_time(fn, repeat):
    fn()  # warm caches (the fallback memoises its sparse weights)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--angles", type=int, default=40)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--matmul", type=int, default=96, help="square matmul size")
    args = p.parse_args(argv)

    if _compiled is None:
        print("compiled extension not built; only the fallback is available")
    geom = RadonGeometry(args.size, args.angles, default_detectors(args.size))
    image = shepp_logan(args.size)
    sino = np.random.default_rng(0).standard_normal((args.angles, geom.detectors))
    rng = np.random.default_rng(1)
    a = rng.standard_normal((args.matmul, args.matmul))
    b = rng.standard_normal((args.matmul, args.matmul))

    cases = {
        f"radon_forward {args.size}^2 x {args.angles}": lambda k: k.radon_forward(image, *geom.kernel_args()),
        f"radon_adjoint {args.size}^2 x {args.angles}": lambda k: k.radon_adjoint(sino, args.size, *geom.kernel_args()),
        f"matmul_ordered {args.matmul}^3": lambda k: k.matmul_ordered(a, b),
    }
    print(f"{'kernel':<32}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}{'max |diff|':>13}")
    for name, call in cases.items():
        t_py = _median_time(lambda: call(_kernels_py), args.repeat)
        if _compiled is None:
            print(f"{name:<32}{t_py * 1e3:>12.3f}{'-':>14}{'-':>10}{'-':>13}")
            continue
        t_c = _median_time(lambda: call(_compiled), args.repeat)
        diff = float(np.max(np.abs(call(_kernels_py) - call(_compiled))))
        print(f"{name:<32}{t_py * 1e3:>12.3f}{t_c * 1e3:>14.3f}{t_py / t_c:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
