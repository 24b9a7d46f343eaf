"""Backend selection for the hot numeric kernels.

Kernels are written once, in nopython-compatible numpy, and compiled with
numba unless the environment says otherwise:

    STEELPROP_NUMBA=0   force the plain numpy/CPython path
    STEELPROP_NUMBA=1   require numba (ImportError if missing)

Default is "auto": use numba when importable. The two paths execute the
same statements in the same order, so results are bit-identical; only
speed differs (see benchmarks/bench_kernels.py).
"""

import os

_FLAG = os.environ.get("STEELPROP_NUMBA", "auto").strip().lower()

try:
    from numba import njit as _njit
    _HAS_NUMBA = True
except ImportError:
    _HAS_NUMBA = False
    _njit = None

if _FLAG in ("0", "false", "off", "no"):
    USE_NUMBA = False
elif _FLAG in ("1", "true", "on", "yes"):
    if not _HAS_NUMBA:
        raise ImportError("STEELPROP_NUMBA=1 but numba is not importable")
    USE_NUMBA = True
else:
    USE_NUMBA = _HAS_NUMBA

BACKEND = "numba" if USE_NUMBA else "numpy"


def maybe_jit(func):
    """Compile `func` with numba when the numba backend is active.

    The original Python function stays reachable as `.py_func` either way,
    so benchmarks can time both paths from one process.
    """
    if USE_NUMBA:
        return _njit(cache=True, fastmath=False)(func)
    func.py_func = func
    return func
