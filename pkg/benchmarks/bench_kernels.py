"""Compare the compiled and pure-Python assignment kernels.

Usage: python3 benchmarks/bench_kernels.py [--sizes 8 32 128] [--repeats 5] [--json FILE]

Each size is timed on the same random cost matrices for both backends;
the best of ``--repeats`` runs is reported, as is a check that both
backends reach the same total cost.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from lagr import _kernels_py

try:
    from lagr import _kernels
except ImportError:
    _kernels = None


def time_kernel(fn, mats, repeats):
    timer = timeit.Timer(lambda: [fn(m) for m in mats])
    return min(timer.repeat(repeat=repeats, number=1)) / len(mats)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16, 32, 64, 128])
    parser.add_argument("--matrices", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write the rows as JSON")
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback can be timed", file=sys.stderr)

    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'n':>5} {'python ms':>10} {'cython ms':>10} {'speedup':>8}  same cost")
    for n in args.sizes:
        mats = [rng.normal(size=(n, n)) for _ in range(args.matrices)]
        py = time_kernel(_kernels_py.hungarian, mats, args.repeats)
        row = {"n": n, "python_s": py, "cython_s": None, "speedup": None, "agree": None}
        if _kernels is not None:
            cy = time_kernel(_kernels.hungarian, mats, args.repeats)
            agree = all(np.isclose(m[np.arange(n), _kernels_py.hungarian(m)].sum(),
                                   m[np.arange(n), _kernels.hungarian(m)].sum()) for m in mats)
            row.update(cython_s=cy, speedup=py / cy, agree=agree)
            print(f"{n:>5} {py * 1e3:>10.3f} {cy * 1e3:>10.3f} {py / cy:>7.1f}x  {agree}")
        else:
            print(f"{n:>5} {py * 1e3:>10.3f} {'-':>10} {'-':>8}  -")
        rows.append(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
