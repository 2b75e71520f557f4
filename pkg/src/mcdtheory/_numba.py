"""Optional numba acceleration.

Set ``MCDTHEORY_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. for
debugging or when comparing both paths in the benchmark.
"""

import os

_disabled = os.environ.get("MCDTHEORY_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit

    numba_available = True
except ImportError:
    numba_available = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def use_numba() -> bool:
    return numba_available
