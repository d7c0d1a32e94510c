"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback is used.  Setting KPZCUBIC_BACKEND=python forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("KPZCUBIC_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

weighted_kernel = _impl.weighted_kernel
cauchy_sum = _impl.cauchy_sum

__all__ = ["BACKEND", "weighted_kernel", "cauchy_sum"]
