"""Select the training kernels at import time.

The compiled extension is preferred; set ``SEQ2VEC_BACKEND=python`` to force
the pure-Python fallback.
"""
from __future__ import annotations

import logging
import os
from types import ModuleType

from seq2vec import _kernels_py

logger = logging.getLogger(__name__)

try:
    from seq2vec import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available() -> list[str]:
    return (["cython"] if _compiled is not None else []) + ["python"]


def get_kernels(name: str | None = None) -> ModuleType:
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


_requested = os.environ.get("SEQ2VEC_BACKEND", "").strip().lower()
if _requested == "python" or _compiled is None:
    kernels: ModuleType = _kernels_py
    if _compiled is None and _requested != "python":
        logger.warning("compiled kernels unavailable; using the slow pure-Python fallback")
else:
    kernels = _compiled

BACKEND: str = kernels.NAME
