"""Timing of the compiled Lerch-series kernel against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import math
import timeit

from fblbc import _pykernels
from fblbc.specfun import DEFAULT_PRECISION

try:
    from fblbc import _kernels
except ImportError:
    _kernels = None

CASES = [(-50.0, 0.5), (-500.0, 1.0), (-2500.0, 0.0), (-2500.0, 7.5), (-10000.0, 2.0)]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    tol, mt = DEFAULT_PRECISION.rel_tol, DEFAULT_PRECISION.max_terms
    print(f"{'s':>9} {'a':>5} {'terms':>7} {'python_us':>11} {'cython_us':>11} {'speedup':>8} {'rel_diff':>9}")
    for s, a in CASES:
        py = _pykernels.lerch_log(s, a, tol, mt)
        t_py = min(timeit.repeat(lambda: _pykernels.lerch_log(s, a, tol, mt),
                                 number=1, repeat=max(3, args.repeat // 4))) * 1e6
        if _kernels is None:
            print(f"{s:9.0f} {a:5.1f} {py[1]:7d} {t_py:11.1f} {'n/a':>11} {'n/a':>8} {'n/a':>9}")
            continue
        cy = _kernels.lerch_log(s, a, tol, mt)
        t_cy = min(timeit.repeat(lambda: _kernels.lerch_log(s, a, tol, mt),
                                 number=1, repeat=args.repeat)) * 1e6
        diff = abs(math.expm1(cy[0] - py[0]))
        print(f"{s:9.0f} {a:5.1f} {py[1]:7d} {t_py:11.1f} {t_cy:11.1f} {t_py / t_cy:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
