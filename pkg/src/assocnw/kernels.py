"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``ASSOCNW_PURE=1`` to force
the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("ASSOCNW_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

log_terms = _impl.log_terms
log_density_many = _impl.log_density_many
sq_dist_matrix = _impl.sq_dist_matrix
loo_loglik = _impl.loo_loglik
merge_q = _impl.merge_q
best_pair = _impl.best_pair

__all__ = ["BACKEND", "log_terms", "log_density_many", "sq_dist_matrix",
           "loo_loglik", "merge_q", "best_pair"]
