"""Hot numeric kernels with a compiled core and a NumPy fallback.

The compiled extension is selected at import when present; set
RIGORBENCH_PURE_PYTHON=1 to force the NumPy path. Both backends are tested
for bit-identical output, so callers never need to care which one is active.
"""

import os

from . import pyops

if os.environ.get("RIGORBENCH_PURE_PYTHON"):
    _impl = pyops
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        _impl = pyops
        BACKEND = "python"

box_downsample_sums = _impl.box_downsample_sums
bilinear_resize = _impl.bilinear_resize
hamming_self_pairs = _impl.hamming_self_pairs
hamming_cross_pairs = _impl.hamming_cross_pairs

__all__ = [
    "BACKEND",
    "bilinear_resize",
    "box_downsample_sums",
    "hamming_cross_pairs",
    "hamming_self_pairs",
]
