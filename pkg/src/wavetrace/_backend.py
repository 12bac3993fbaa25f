"""Select the kernel implementation at import time.

The compiled extension is used when it can be imported. Setting the
environment variable ``WAVETRACE_BACKEND`` to ``numpy`` forces the pure
numpy fallback; setting it to ``cython`` makes a missing extension an
import error instead of a silent fallback.
"""

import os

from . import _kernels_py

_choice = os.environ.get("WAVETRACE_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numpy", "cython"):
    raise ImportError(f"WAVETRACE_BACKEND must be auto, numpy or cython, got {_choice!r}")

kernels = _kernels_py
if _choice != "numpy":
    try:
        from . import _kernels as kernels  # noqa: F811
    except ImportError:
        if _choice == "cython":
            raise
        kernels = _kernels_py

BACKEND = kernels.BACKEND


def get_kernels(name: str | None = None):
    """Return a kernel module by name, or the active one when ``name`` is None."""
    if name is None:
        return kernels
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
