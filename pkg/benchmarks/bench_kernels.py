"""Compare the compiled and numpy kernels on KPZ-sized node sets.

Usage: python3 benchmarks/bench_kernels.py [--sizes 200,800,1600] [--repeat 5]

Prints one line per (kernel, size) with the best-of-repeat wall time for
each backend, the speedup and the max abs difference between outputs.
"""

import argparse
import timeit

import numpy as np

from kpzcubic import _kernels_py

try:
    from kpzcubic import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def make_inputs(n, m=2, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(-6, 6, n)
    nodes = np.where(np.arange(n) % 2, 1, -1) * (1 + np.sqrt(1 + t**2)) + 1j * t
    weights = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f = rng.standard_normal((n, m + 1)) + 1j * rng.standard_normal((n, m + 1))
    g = rng.standard_normal((n, m + 1)) + 1j * rng.standard_normal((n, m + 1))
    z = -1.0 - rng.random(n) + 1j * rng.standard_normal(n)
    y = np.linspace(-20, 20, 4 * n)
    vals = np.exp(-(y**2) / 8) + 0j
    return nodes, weights, f, g, z, y, vals


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--sizes", default="200,800,1600")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<16}{'n':>6}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>9}{'max diff':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        nodes, weights, f, g, z, y, vals = make_inputs(n)
        cases = {
            "weighted_kernel": (lambda mod: mod.weighted_kernel(nodes, weights, f, g)),
            "cauchy_sum": (lambda mod: mod.cauchy_sum(z, y, vals)),
        }
        for name, call in cases.items():
            t_py = best(lambda: call(_kernels_py), args.repeat)
            if compiled is None:
                print(f"{name:<16}{n:>6}{t_py:>12.4f}{'-':>12}{'-':>9}{'-':>11}")
                continue
            t_cy = best(lambda: call(compiled), args.repeat)
            diff = np.abs(call(compiled) - call(_kernels_py)).max()
            print(f"{name:<16}{n:>6}{t_py:>12.4f}{t_cy:>12.4f}{t_py / t_cy:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
