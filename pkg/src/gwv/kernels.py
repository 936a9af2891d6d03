"""Kernel backend selection.

The compiled extension is used when it imports cleanly; setting
``GWV_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("GWV_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

pairwise_sum = _impl.pairwise_sum
bump_rows = _impl.bump_rows
winding_numbers = _impl.winding_numbers
crossing_count = _impl.crossing_count
min_distance = _impl.min_distance
bspline_scatter = _impl.bspline_scatter


def backends():
    """Map backend name to module for every backend available here."""
    out = {"python": _fallback}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
