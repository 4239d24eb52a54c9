"""First-alarm scan kernels.

The compiled extension is preferred; set QCDEVAL_BACKEND=python to force the
numpy fallback (used by the benchmark and as a safety net on platforms where
the extension failed to build).
"""

import os

from . import _py

if os.environ.get("QCDEVAL_BACKEND", "").lower() == "python":
    _impl = _py
    USING_COMPILED = False
else:
    try:
        from . import _speedups as _impl

        USING_COMPILED = True
    except ImportError:
        _impl = _py
        USING_COMPILED = False

gsr_first_alarm = _impl.gsr_first_alarm
cusum_first_alarm = _impl.cusum_first_alarm
ewma_first_alarm = _impl.ewma_first_alarm

__all__ = [
    "USING_COMPILED",
    "gsr_first_alarm",
    "cusum_first_alarm",
    "ewma_first_alarm",
]
