"""Kernel selection: the compiled extension when importable, else numpy.

Set ``GWPERC_PURE=1`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("GWPERC_PURE") == "1":
    _impl = _fallback
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback

IMPLEMENTATION: str = _impl.IMPLEMENTATION
cluster_batch = _impl.cluster_batch
subtree_counts = _impl.subtree_counts
iic_batch = _impl.iic_batch


def available() -> dict:
    """Name -> module for every importable implementation."""
    out = {"numpy": _fallback}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
