"""Kernel backend selection.

The hot loops (Viterbi trellis, stream detection, demosaicing) exist twice:
numba @njit kernels and pure-numpy fallbacks with identical results. Set
VCESIM_BACKEND=numpy or VCESIM_BACKEND=numba before importing the package
to force one; the default is numba when it imports, numpy otherwise.
"""

import os

from . import _kernels_np
from .errors import ConfigError

_FLAG = os.environ.get("VCESIM_BACKEND", "").strip().lower()


def _select():
    if _FLAG not in ("", "numpy", "numba"):
        raise ConfigError(f"VCESIM_BACKEND must be 'numpy' or 'numba', got {_FLAG!r}")
    if _FLAG == "numpy":
        return _kernels_np, "numpy"
    try:
        from . import _kernels_numba
    except ImportError:
        if _FLAG == "numba":
            raise
        return _kernels_np, "numpy"
    return _kernels_numba, "numba"


kernels, BACKEND = _select()


def backend_name() -> str:
    return BACKEND
