"""Numba availability switch.

Hot kernels are compiled with numba when it is importable.  Setting
``PIGSOLVE_DISABLE_NUMBA=1`` forces the pure-numpy implementations, which
produce identical results (bitwise for the sweeps, to rounding for the
layered solves).
"""

import os
import warnings

_FLAG = "PIGSOLVE_DISABLE_NUMBA"

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
else:
    # an old system TBB makes numba fall back to another threading layer; say nothing
    warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

NUMBA_DISABLED = os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


prange = numba.prange if HAVE_NUMBA else range


def resolve_backend(backend=None):
    """Return ``"numba"`` or ``"numpy"``.

    ``None`` picks the default selected by the environment flag.
    """
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def set_threads(n):
    """Cap numba worker threads; a no-op on the numpy path."""
    if HAVE_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
