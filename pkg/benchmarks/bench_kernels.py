"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` time per call for each kernel and the speedup.
"""

import argparse
import timeit

import numpy as np

from nhcontrol._kernels import _pykernels

try:
    from nhcontrol._kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    mats = rng.normal(size=(64, 8, 8)) + 1j * rng.normal(size=(64, 8, 8))
    a = mats[0] / 4
    psi = rng.normal(size=2**12) + 1j * rng.normal(size=2**12)
    u = mats[1]
    return {
        "charpoly 8x8": lambda k: k.charpoly(a),
        "chain_product 64x(8x8)": lambda k: k.chain_product(mats),
        "apply_three_qubit n=12": lambda k: k.apply_three_qubit(psi, u, 9, 4, 1),
        "swap_bits n=12": lambda k: k.swap_bits(psi, 2, 10),
    }


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for name, fn in cases(rng).items():
        t_py = best_time(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<26}{t_py * 1e6:>14.1f}{'n/a':>14}{'':>10}")
            continue
        t_c = best_time(lambda: fn(_ckernels), args.repeat)
        print(f"{name:<26}{t_py * 1e6:>14.1f}{t_c * 1e6:>14.1f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
