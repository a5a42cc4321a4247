"""Kernel backend selection.

The compiled ``_kernels`` extension is used when importable; set
``EVACFLOW_BACKEND=python`` to force the pure-Python fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
impl = _kernels_py

if os.environ.get("EVACFLOW_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def available_backends() -> dict:
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
