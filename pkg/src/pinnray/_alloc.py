"""glibc allocator tuning for the training loop.

Training allocates and frees the same multi-megabyte jets every epoch.  With
glibc's defaults those blocks go through mmap/munmap, so each epoch pays for
fresh zeroed pages.  Raising the mmap threshold keeps them on the heap.
Setting ``PINNRAY_MALLOC_TUNE=0`` disables this; on non-glibc platforms it
is a no-op.
"""
from __future__ import annotations

import ctypes
import ctypes.util
import os

_M_TRIM_THRESHOLD = -1
_M_TOP_PAD = -2
_M_MMAP_THRESHOLD = -3

_done = False


def tune_allocator() -> bool:
    """Apply the settings once per process; returns True if they took effect."""
    global _done
    if _done:
        return True
    if os.environ.get("PINNRAY_MALLOC_TUNE", "1").lower() in ("0", "false", "no", "off"):
        return False
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    mallopt.argtypes = [ctypes.c_int, ctypes.c_int]
    mallopt.restype = ctypes.c_int
    ok = (mallopt(_M_MMAP_THRESHOLD, 32 * 1024 * 1024)
          and mallopt(_M_TRIM_THRESHOLD, 1024 * 1024 * 1024)
          and mallopt(_M_TOP_PAD, 256 * 1024 * 1024))
    _done = bool(ok)
    return _done
