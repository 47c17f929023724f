"""Compare the compiled and numpy kernel backends on a Neo-Hookean cube.

Usage: python3 benchmarks/bench_kernels.py [n_elements] [repeats]
"""

import sys

from pdnimpact import bench, kernels


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 20_000
    repeats = int(argv[2]) if len(argv) > 2 else 5
    res = bench.kernel_bench(n, repeats)
    names = sorted(res)
    print(f"{n} elements, best of {repeats}; default backend {kernels.BACKEND}")
    print(f"{'kernel':24s}" + "".join(f"{b:>12s}" for b in names)
          + ("     numpy/cython" if {"numpy", "cython"} <= set(names) else ""))
    for key in res[names[0]]:
        line = f"{key:24s}" + "".join(f"{res[b][key]:12.5f}" for b in names)
        if {"numpy", "cython"} <= set(names):
            line += f"{res['numpy'][key] / res['cython'][key]:17.1f}"
        print(line)


if __name__ == "__main__":
    main(sys.argv)
