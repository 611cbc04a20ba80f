"""Compiled vs numpy kernel timings for one Lax-Oleinik application.

    python benchmarks/bench_kernels.py [--sizes 1024 4096 16384] [--repeat 5]
"""

import argparse
import time

import numpy as np

from twistkam import _kernels
from twistkam.generating import GeneratingFunction

try:
    from twistkam import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1024, 4096, 16384])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--c", type=float, default=0.3)
    args = ap.parse_args()

    gf = GeneratingFunction.frenkel_kontorova(1.0)
    backends = [("python", _kernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled kernel not built; timing the numpy fallback only")

    print(f"{'n':>7} {'gap':>5} " + " ".join(f"{name:>12}" for name, _ in backends) + "  speedup")
    for n in args.sizes:
        x = np.arange(n) / n
        g = 0.05 * np.sin(2 * np.pi * x) + 0.02 * np.abs(np.sin(3 * np.pi * x))
        M = int(np.ceil(gf.window_for(args.c) * n))
        for with_gap in (False, True):
            times = []
            outs = []
            for _, mod in backends:
                def run(mod=mod):
                    return mod.lo_kernel(g, gf.coupling, args.c, M, gf.v0, gf.coeffs, True, with_gap)
                outs.append(run())
                reps = args.repeat if not (with_gap and mod is _kernels and n > 4096) else 1
                times.append(best_of(run, reps))
            if len(outs) == 2:
                assert np.max(np.abs(outs[0][0] - outs[1][0])) <= 1e-12, "backends disagree"
            speed = f"{times[0] / times[-1]:8.1f}x" if len(times) == 2 else ""
            print(f"{n:>7} {str(with_gap):>5} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times)
                  + "  " + speed)


if __name__ == "__main__":
    main()
