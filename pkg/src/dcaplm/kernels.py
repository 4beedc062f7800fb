"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; otherwise (or when
``DCAPLM_PURE_PYTHON`` is set to a non-empty value other than ``0``) the numpy
implementation is used. ``BACKEND`` records the choice.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_force_python = os.environ.get("DCAPLM_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"
    else:
        BACKEND = "cython"


def bspline_design(z, knots, degree: int) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=np.float64).reshape(-1)
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    return _impl.bspline_design(z, knots, int(degree))


def group_score_sums(scores, multipliers, offsets) -> np.ndarray:
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    multipliers = np.ascontiguousarray(multipliers, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return _impl.group_score_sums(scores, multipliers, offsets)
