"""Numba acceleration shim.

Hot kernels (median filtering, stick-slip stepping) are written twice: a
scalar-loop version compiled with ``@njit`` and a vectorized pure-numpy
version. Dispatch is decided once at import time:

* numba importable and ``SLIPNET_NO_NUMBA`` unset -> compiled kernels
* otherwise -> numpy fallback

Both lanes are always importable when numba is installed, so benchmarks and
tests can compare them directly regardless of the flag.
"""

import os

DISABLE_ENV = "SLIPNET_NO_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        # Identity decorator so kernel definitions stay importable.
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def _env_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


NUMBA_ENABLED = HAVE_NUMBA and not _env_disabled()
