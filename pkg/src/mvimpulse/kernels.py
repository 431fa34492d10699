"""Kernel backend selection.

The compiled extension is used when importable; otherwise the NumPy fallback.
Set ``MVIMPULSE_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("MVIMPULSE_BACKEND", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

advance = _impl.advance
mean = _impl.mean
STOP_NONE = _impl.STOP_NONE
STOP_TRIGGER = _impl.STOP_TRIGGER
STOP_BANKRUPT = _impl.STOP_BANKRUPT
STOP_NONFINITE = _impl.STOP_NONFINITE


def backends():
    """Available backend modules keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
