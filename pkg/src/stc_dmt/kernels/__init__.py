"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython module is used when it was built and imports cleanly; setting
``STC_DMT_PURE_PYTHON=1`` forces the fallback. ``BACKEND`` names the
active choice.

Kernels
-------
fp_enumerate
    Fincke-Pohst enumeration of integer points in an ellipsoid.
ml_argmin
    Exhaustive minimum of per-trial quadratic decoding metrics.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("STC_DMT_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # pragma: no cover - depends on the build
        compiled_backend = None

if compiled_backend is not None:
    fp_enumerate = compiled_backend.fp_enumerate
    ml_argmin = compiled_backend.ml_argmin
    BACKEND = "cython"
else:
    fp_enumerate = python_backend.fp_enumerate
    ml_argmin = python_backend.ml_argmin
    BACKEND = "python"

__all__ = ["fp_enumerate", "ml_argmin", "BACKEND", "python_backend", "compiled_backend"]
