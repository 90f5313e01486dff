"""Hot kernels with a compiled core and a NumPy fallback.

The compiled module is built at install time; when it is missing (no C
compiler, skipped build) or TABLELIFT_PURE_PYTHON=1 is set, the NumPy
implementations take over.  Both backends share signatures and, for the
integer kernels (minhash, tree splits), produce bit-identical results.
"""

import os

from ._pykernels import U64_MAX

if os.environ.get("TABLELIFT_PURE_PYTHON") == "1":
    _impl = None
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = None

if _impl is not None:
    BACKEND = "compiled"
    minhash_block = _impl.minhash_block
    bm25_accumulate = _impl.bm25_accumulate
    lasso_sweeps = _impl.lasso_sweeps
    best_split_classification = _impl.best_split_classification
    best_split_regression = _impl.best_split_regression
else:
    from ._pykernels import (
        best_split_classification,
        best_split_regression,
        bm25_accumulate,
        lasso_sweeps,
        minhash_block,
    )

    BACKEND = "python"

__all__ = [
    "BACKEND",
    "U64_MAX",
    "best_split_classification",
    "best_split_regression",
    "bm25_accumulate",
    "lasso_sweeps",
    "minhash_block",
]
