"""Best-effort glibc malloc tuning for large-array churn.

Attention maps allocate and free ~60 MB buffers every step.  With glibc
defaults those go through mmap/munmap, so every step pays page-fault
costs again; raising the mmap and trim thresholds keeps the buffers in
the heap where they are reused.  Measured ~2-20x on the hot ops.
No-op on non-glibc platforms or when PASAD_NO_MALLOC_TUNING is set.
"""

from __future__ import annotations

import ctypes
import os
import sys

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_done = False


def tune() -> bool:
    global _done
    if _done:
        return True
    if os.environ.get("PASAD_NO_MALLOC_TUNING") or not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        ok = libc.mallopt(_M_MMAP_THRESHOLD, 1 << 30) == 1
        ok = libc.mallopt(_M_TRIM_THRESHOLD, 1 << 30) == 1 and ok
        _done = ok
        return ok
    except OSError:
        return False
