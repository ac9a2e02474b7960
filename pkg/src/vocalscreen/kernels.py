"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``VOCALSCREEN_PURE_PYTHON=1`` is set, the numpy twins in ``_pycore`` are used.
"""
import os

from . import _pycore

if os.environ.get("VOCALSCREEN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pycore
        BACKEND = "python"

build_tree = _impl.build_tree
apply_tree = _impl.apply_tree
lasso_path = _impl.lasso_path
close_return_histogram = _impl.close_return_histogram

__all__ = ["BACKEND", "build_tree", "apply_tree", "lasso_path", "close_return_histogram"]
