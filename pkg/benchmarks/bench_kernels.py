"""Compare the compiled and pure-Python coordinate-descent kernels.

Run ``python3 benchmarks/bench_kernels.py``. Each case fits a Lasso path
point with both backends, checks the coefficients agree and reports the
median wall time over a few repeats.
"""

import argparse
import statistics
import time

import numpy as np

from hdma import BACKENDS
from hdma.data import Dataset
from hdma.solver import fit_weighted_lasso, lambda_max


def time_fit(d, lam, backend, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit = fit_weighted_lasso(d, None, lam, backend=backend)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), fit.beta


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if "cython" not in BACKENDS:
        raise SystemExit("compiled kernel not built; reinstall without HDMA_NO_EXT")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>5} {'p':>6} {'ratio':>6} {'python s':>10} {'cython s':>10} {'speedup':>8} {'max diff':>9}")
    for n, p in [(100, 100), (200, 1000), (500, 2000)]:
        X = rng.standard_normal((n, p))
        beta = np.zeros(p)
        beta[:10] = 1.0
        d = Dataset(X @ beta + 0.5 * rng.standard_normal(n), X)
        for ratio in (0.5, 0.1, 0.02):
            lam = ratio * lambda_max(d)
            tp, bp = time_fit(d, lam, "python", args.repeats)
            tc, bc = time_fit(d, lam, "cython", args.repeats)
            diff = float(np.max(np.abs(bp - bc)))
            print(f"{n:>5} {p:>6} {ratio:>6} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
