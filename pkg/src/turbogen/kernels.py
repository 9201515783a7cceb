"""Kernel backend selection.

The compiled extension is used when importable; ``TURBOGEN_PURE_PYTHON=1``
forces the numpy fallback.
"""
from __future__ import annotations

import os

if os.environ.get("TURBOGEN_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"

apply_1q = _impl.apply_1q
apply_cx = _impl.apply_cx
norm_squared = _impl.norm_squared

__all__ = ["BACKEND", "apply_1q", "apply_cx", "norm_squared"]
