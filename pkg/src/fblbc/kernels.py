"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set FBL_PURE_PYTHON=1 to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
lerch_log = _pykernels.lerch_log

if os.environ.get("FBL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels

        lerch_log = _kernels.lerch_log
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass
