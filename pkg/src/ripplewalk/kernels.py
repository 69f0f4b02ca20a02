"""Backend selection for the CSR kernels.

The compiled extension is preferred; set ``RWT_PURE_PYTHON=1`` to force the
numpy/scipy fallback (useful for benchmarking and for debugging builds).
"""
import os

from . import _fallback

if os.environ.get("RWT_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback
BACKEND = "cython" if _compiled is not None else "python"

csr_spmm = _impl.csr_spmm
gather_neighbors = _impl.gather_neighbors
induced_csr = _impl.induced_csr
normalized_with_self_loops = _impl.normalized_with_self_loops


def backends():
    """Map of available backend name -> kernel module."""
    found = {"python": _fallback}
    if _compiled is not None:
        found["cython"] = _compiled
    return found
