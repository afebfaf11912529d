"""Allocator tuning for the transform-heavy inner loop.

Each right-hand side allocates a few dozen short-lived arrays of 0.1-2 MB.
glibc serves blocks above its mmap threshold with fresh pages that are
zero-filled by the kernel on first touch, which on small virtual machines
costs more than the arithmetic.  Keeping such blocks on the heap removes
that cost.  Set ``HYDROPRIM_MALLOC_TUNING=0`` to leave the allocator alone.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import logging
import os
import sys
import threading

logger = logging.getLogger(__name__)

M_TRIM_THRESHOLD = -1
M_TOP_PAD = -2
M_MMAP_THRESHOLD = -3

_lock = threading.Lock()
_done = False


def tune_allocator() -> bool:
    """Raise glibc's mmap/trim thresholds once per process; returns whether tuning is active."""
    global _done
    with _lock:
        if _done:
            return _active
        _done = True
        return _apply()


_active = False


def _apply() -> bool:
    global _active
    if os.environ.get("HYDROPRIM_MALLOC_TUNING", "1") == "0" or not sys.platform.startswith("linux"):
        return False
    name = ctypes.util.find_library("c")
    if name is None:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    mallopt.argtypes = [ctypes.c_int, ctypes.c_int]
    mallopt.restype = ctypes.c_int
    ok = (
        mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024)
        and mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024)
        and mallopt(M_TOP_PAD, 16 * 1024 * 1024)
    )
    _active = bool(ok)
    logger.debug("malloc tuning %s", "applied" if _active else "rejected")
    return _active
