"""Kernel backend selection.

The hot per-pixel loops (joint histogram, component labelling, border
following) have two interchangeable implementations: a Cython extension
(``sandshape._kernels._core``) and a NumPy/SciPy fallback. The compiled
backend is preferred when importable; set ``SANDSHAPE_PURE_PYTHON=1`` to
force the fallback. Both return identical values.
"""

from __future__ import annotations

import os

import numpy as np

from . import pyimpl

if os.environ.get("SANDSHAPE_PURE_PYTHON"):
    _impl = pyimpl
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = pyimpl
        BACKEND = "python"


def joint_hist(codes_a, codes_b, n_bins: int) -> np.ndarray:
    a = np.ascontiguousarray(codes_a, dtype=np.int64).ravel()
    b = np.ascontiguousarray(codes_b, dtype=np.int64).ravel()
    if a.shape != b.shape:
        raise ValueError("code vectors differ in length")
    return _impl.joint_hist(a, b, int(n_bins))


def label_components(mask) -> tuple[np.ndarray, int]:
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    return _impl.label_components(m)


def trace_border(mask, start_r: int, start_c: int) -> np.ndarray:
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    if not m[start_r, start_c]:
        raise ValueError("border start pixel is background")
    return _impl.trace_border(m, int(start_r), int(start_c))
