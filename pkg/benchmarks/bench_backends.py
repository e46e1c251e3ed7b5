"""Compare the numba and numpy batch kernels.

    python3 benchmarks/bench_backends.py [--repeat 3] [--problems autonomous,ex5]

Each case integrates M realizations of n steps with the rk scheme (plus em
for reference) on identical inputs.  The first numba call per problem
includes compilation; it is reported separately and excluded from the
timings.  Also checks that both backends agree.
"""
import argparse
import time

import numpy as np

from sderk import kernels, streams
from sderk.problems import get_problem

CASES = [(32, 4096), (400, 1024), (400, 16384), (2000, 256)]


def inputs(M, n, seed=0):
    h = 1.0 / n
    dW = np.sqrt(h) * streams.derive(seed, 0, "wiener").standard_normal((M, n))
    S = 2.0 * streams.derive(seed, 0, "signs").integers(0, 2, size=(M, n)) - 1.0
    return dW, S, h


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--problems", default="autonomous,ex2,ex5")
    ap.add_argument("--schemes", default="rk,em")
    args = ap.parse_args()
    if kernels._numba is None:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'problem':12s} {'scheme':6s} {'M':>5s} {'n':>6s} {'numpy s':>9s} {'numba s':>9s} "
          f"{'speedup':>8s} {'max |diff|':>11s}")
    for pid in args.problems.split(","):
        p = get_problem(pid)
        for scheme in args.schemes.split(","):
            dW, S, h = inputs(4, 8)
            t = time.perf_counter()
            kernels.advance(scheme, p, dW, S, t0=0.0, h=h, backend="numba")
            print(f"# {pid}/{scheme}: first numba call (compile) {time.perf_counter() - t:.2f}s")
            for M, n in CASES:
                dW, S, h = inputs(M, n)

                def run(backend):
                    return kernels.advance(scheme, p, dW, S, t0=0.0, h=h, backend=backend).final

                t_np, a = best_of(lambda: run("numpy"), args.repeat)
                t_nb, b = best_of(lambda: run("numba"), args.repeat)
                diff = float(np.nanmax(np.abs(a - b))) if a.size else 0.0
                print(f"{pid:12s} {scheme:6s} {M:5d} {n:6d} {t_np:9.4f} {t_nb:9.4f} "
                      f"{t_np / t_nb:8.1f}x {diff:11.2e}")


if __name__ == "__main__":
    main()
