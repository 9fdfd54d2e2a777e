"""Backend selection for the landscape kernels.

The compiled extension is used when it imports; otherwise, or when
``MAXCODE_PURE_PYTHON=1`` is set, the pure-Python module is used.
"""
import os

from . import _kernels_py

if os.environ.get("MAXCODE_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
evaluate_points = _impl.evaluate_points
grid_best = _impl.grid_best
ball_best = _impl.ball_best
