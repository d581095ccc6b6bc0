"""Pick the kernel implementation at import time.

The compiled ``_kernels`` extension is used when it was built; otherwise the
numpy twin in ``_pykernels``. ``BRAFL_BACKEND=python`` forces the fallback.
"""
from __future__ import annotations

import logging
import os
from types import ModuleType

from . import _pykernels

log = logging.getLogger(__name__)


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()

if os.environ.get("BRAFL_BACKEND", "").lower() == "python" or _compiled is None:
    kernels: ModuleType = _pykernels
    BACKEND = "python"
else:
    kernels = _compiled
    BACKEND = "cython"

log.debug("brafl kernel backend: %s", BACKEND)


def available_backends() -> dict[str, ModuleType]:
    out = {"python": _pykernels}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
