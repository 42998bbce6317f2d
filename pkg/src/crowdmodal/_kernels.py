"""Backend selection for the inner loops.

The compiled extension is used when importable; set ``CROWDMODAL_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("CROWDMODAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

squeeze_accumulate = _impl.squeeze_accumulate
column_peaks = _impl.column_peaks
segment_accumulate = _impl.segment_accumulate

BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels

    BACKENDS["cython"] = _ckernels
except ImportError:
    pass
