"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Set ``SPHEREFV_PURE_PYTHON=1`` to force the numpy path.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("SPHEREFV_PURE_PYTHON"):
        raise ImportError("compiled kernels disabled by environment")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

circumcenters = _impl.circumcenters
dual_measures = _impl.dual_measures
lloyd_step = _impl.lloyd_step
