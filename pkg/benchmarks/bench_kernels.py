"""Benchmark the hot kernels: numba-compiled vs plain numpy paths.

The jitted dispatchers keep the original Python function as .py_func, so
both paths run from one process. Run after a warm-up call so compilation
is not billed to the numba column. With STEELPROP_NUMBA=0 the package
itself runs the numpy path everywhere; this script still reports both.

Usage: python benchmarks/bench_kernels.py [n_samples]
"""

import sys
import time

import numpy as np

from steelprop import _accel
from steelprop.svr import _smo, _kernel_row_into
from steelprop.tree import _best_split, _route, grow, _flatten


def timeit(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, fn, args, repeat=3):
    if not _accel.USE_NUMBA:
        t_py = timeit(fn, *args, repeat=repeat)
        print(f"{name:28s} numpy {t_py:8.4f}s   (numba disabled)")
        return
    fn(*args)   # warm-up: compile outside the timed region
    t_nb = timeit(fn, *args, repeat=repeat)
    t_py = timeit(fn.py_func, *args, repeat=repeat)
    print(f"{name:28s} numba {t_nb:8.4f}s   numpy {t_py:8.4f}s   "
          f"speedup {t_py / max(t_nb, 1e-12):6.1f}x")


def main(n=1500):
    rng = np.random.default_rng(42)
    X = rng.uniform(-1.0, 1.0, size=(n, 10))
    y = np.sin(2.0 * X[:, 0]) + X[:, 1] * X[:, 2] + 0.1 * rng.normal(size=n)
    y = (y - y.mean()) / y.std()

    print(f"backend={_accel.BACKEND}  n={n}\n")

    sqn = np.sum(X * X, axis=1)
    out = np.empty(n)
    bench("svr kernel row (gaussian)",
          _kernel_row_into, (X, sqn, 0, 2, 3, 0.3, 1.0, out), repeat=20)

    bench("svr smo solve", _smo,
          (X, y, 1.0, 0.1, 1e-3, 200_000, 2, 3, 0.3, 1.0, n))

    bench("tree best split", _best_split, (X, y, 1), repeat=10)

    root = grow(X, y)
    arrays = _flatten(root)
    probes = rng.uniform(-1.0, 1.0, size=(20_000, 10))
    route_out = np.empty(probes.shape[0])
    bench("tree route 20k rows", _route, (*arrays, probes, route_out), repeat=10)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1500)
