"""Thread-count helper honouring the MHL_THREADS environment cap."""

from __future__ import annotations

import os


def worker_count() -> int:
    cap = os.environ.get("MHL_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n
