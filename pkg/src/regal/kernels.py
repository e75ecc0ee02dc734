"""Backend selection for the hot loops.

The compiled extension is used when it imports; ``REGAL_PURE=1`` forces the
numpy fallback.  ``BACKEND`` names the active one.
"""
import os

from . import _fallback

if os.environ.get("REGAL_PURE", "") not in ("", "0"):
    _ext = None
else:
    try:
        from . import _kernels as _ext
    except ImportError:  # extension not built
        _ext = None

if _ext is not None:
    optimistic_vi = _ext.optimistic_vi
    run_policy = _ext.run_policy
    BACKEND = "compiled"
else:
    optimistic_vi = _fallback.optimistic_vi
    run_policy = _fallback.run_policy
    BACKEND = "python"

inner_max_rows = _fallback.inner_max_rows

__all__ = ["optimistic_vi", "run_policy", "inner_max_rows", "BACKEND"]
