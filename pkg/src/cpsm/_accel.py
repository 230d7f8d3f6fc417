"""Backend switch for the compiled kernels.

Set ``CPSM_DISABLE_NUMBA=1`` to force the pure-numpy code paths. When numba
is not importable the numpy paths are used regardless.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None
    HAVE_NUMBA = False

_DISABLED = os.environ.get("CPSM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def resolve_backend(backend=None):
    """Return "numba" or "numpy" for an explicit request or the env default."""
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
