"""Numeric kernels with a compiled fast path and a numpy fallback.

The compiled extension (``_native``) is preferred when present. Set
``ODEAL_KERNELS=pure`` to force the numpy implementation, or
``ODEAL_KERNELS=native`` to fail loudly when the extension is missing.

Kernel contract notes:
- ``knn_search(query, ref, k, exclude_self)``: k must not exceed the number
  of candidate rows (len(ref), minus one when excluding self). Neighbor ties
  on squared distance break toward the lower reference index.
- ``tree_build(X, g, h, max_depth, min_leaf, lam)``: flat preorder arrays;
  feature == -1 marks a leaf carrying the Newton value -G/(H+lam).
- ``tree_predict_raw`` / ``iforest_depths``: evaluate one flat tree per call.
"""

import os

from . import _pure

_requested = os.environ.get("ODEAL_KERNELS", "auto").lower()
if _requested not in ("auto", "pure", "native"):
    raise RuntimeError(
        f"ODEAL_KERNELS must be auto, pure or native, got {_requested!r}"
    )

if _requested == "pure":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        _impl = _pure
        BACKEND = "pure"

knn_search = _impl.knn_search
tree_build = _impl.tree_build
tree_predict_raw = _impl.tree_predict_raw
iforest_depths = _impl.iforest_depths

__all__ = [
    "BACKEND",
    "knn_search",
    "tree_build",
    "tree_predict_raw",
    "iforest_depths",
]
