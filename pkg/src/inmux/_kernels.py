"""Numeric-backend selection.

Prefers the compiled Cython core; falls back to the pure-Python
implementation when the extension is unavailable.  Set the environment
variable ``INMUX_PURE_PYTHON=1`` before import to force the fallback
(used by the backend-equivalence tests and the benchmark).
"""

import os

if os.environ.get("INMUX_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _core_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _core as kernels  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        from . import _core_py as kernels  # type: ignore[no-redef]
        BACKEND = "python"


def get_backend(name=None):
    """Return a kernel module by name ('cython' | 'python' | None=active)."""
    if name is None:
        return kernels
    if name == "python":
        from . import _core_py
        return _core_py
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
