"""Process-wide allocator tuning for large-array throughput.

glibc releases big (>32 MB) blocks back to the kernel on free, so every
multi-megapixel temporary pays a page-fault storm on first touch and
throughput stops scaling linearly with pixel count. Raising the mmap and
trim thresholds keeps those blocks on the heap for reuse. Set
STYLER_NO_MALLOC_TUNING=1 to opt out (for embedders that manage their own
allocator); non-glibc platforms are silently left alone.
"""

from __future__ import annotations

import ctypes
import os

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3

_done = False


def tune_malloc() -> bool:
    global _done
    if _done:
        return True
    if os.environ.get("STYLER_NO_MALLOC_TUNING"):
        return False
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(_M_MMAP_THRESHOLD, 1 << 30)
        libc.mallopt(_M_TRIM_THRESHOLD, 1 << 30)
        _done = True
        return True
    except (OSError, AttributeError):
        return False
