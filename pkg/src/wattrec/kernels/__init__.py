"""Training kernels with a compiled core and a pure-Python fallback.

The compiled extension (``_ops``, built from Cython) is preferred; when it
is missing, or when WATTREC_PURE is set to a truthy value, the equivalent
pure-Python loops from :mod:`wattrec.kernels.pure` are used instead.  Both
backends perform identical arithmetic in identical order.
"""

import logging
import os

from wattrec.kernels import pure

log = logging.getLogger(__name__)

if os.environ.get("WATTREC_PURE", "").lower() in ("1", "true", "yes"):
    _ops = pure
    BACKEND = "pure"
else:
    try:
        from wattrec.kernels import _ops  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _ops = pure
        BACKEND = "pure"
        log.warning("compiled kernels unavailable; using the pure-Python fallback")

svd_epoch = _ops.svd_epoch
svdpp_epoch = _ops.svdpp_epoch
bpr_epoch = _ops.bpr_epoch
logmf_epoch = _ops.logmf_epoch

__all__ = ["BACKEND", "svd_epoch", "svdpp_epoch", "bpr_epoch", "logmf_epoch", "pure"]
