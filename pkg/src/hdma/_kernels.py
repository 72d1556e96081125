"""Backend selection for the coordinate-descent kernel.

The compiled Cython kernel is preferred. Set ``HDMA_PURE_PYTHON=1`` to force
the pure-Python fallback (useful for debugging and for the benchmark).
"""

import os

from . import _cd_py

try:
    from . import _cd_fast
except ImportError:  # extension not built
    _cd_fast = None

BACKENDS = {"python": _cd_py.cd_quadratic}
if _cd_fast is not None:
    BACKENDS["cython"] = _cd_fast.cd_quadratic

if os.environ.get("HDMA_PURE_PYTHON") or _cd_fast is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_kernel(name=None):
    """Return the ``cd_quadratic`` implementation for ``name`` (default: active)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown or unavailable kernel backend {name!r}; "
            f"available: {sorted(BACKENDS)}"
        ) from None


def set_backend(name):
    """Switch the process-wide default kernel backend."""
    global BACKEND
    get_kernel(name)
    BACKEND = name
