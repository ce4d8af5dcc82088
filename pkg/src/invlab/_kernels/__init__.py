"""Hot kernels with a compiled (Cython) core and a numpy fallback.

The compiled module is used when it imports; set ``INVLAB_PURE_PYTHON=1`` to
force the fallback. ``BACKEND`` names the active implementation.
"""
from __future__ import annotations

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("INVLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

sell_forward = _impl.sell_forward
sell_backward = _impl.sell_backward
sell_backlog_forward = _impl.sell_backlog_forward
sell_backlog_backward = _impl.sell_backlog_backward
gammainc_p = _impl.gammainc_p
gamma_ppf = _impl.gamma_ppf

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "sell_forward",
    "sell_backward",
    "sell_backlog_forward",
    "sell_backlog_backward",
    "gammainc_p",
    "gamma_ppf",
]
