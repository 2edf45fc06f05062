"""Kernel selection.

The compiled kernel is preferred when the extension built; the pure-Python
kernel is the fallback.  Set RCLAB_BACKEND=python or RCLAB_BACKEND=compiled
to force one (forcing the compiled kernel raises if it is unavailable).
Both kernels produce bit identical results by construction.
"""

from __future__ import annotations

import os
import sys

_requested = os.environ.get("RCLAB_BACKEND", "").strip().lower()
if _requested not in ("", "compiled", "python"):
    raise ValueError(
        f"RCLAB_BACKEND must be 'compiled' or 'python', got {_requested!r}"
    )

if _requested == "python":
    from ._tape_py import evaluate

    backend_name = "python"
else:
    try:
        from ._tape_cy import evaluate  # type: ignore[no-redef]

        backend_name = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "RCLAB_BACKEND=compiled but the compiled kernel is not built"
            ) from None
        from ._tape_py import evaluate  # type: ignore[no-redef]

        backend_name = "python"
        print(
            "rclab: compiled kernel unavailable, using pure-Python fallback",
            file=sys.stderr,
        )


def get_backend() -> str:
    """Name of the active kernel, 'compiled' or 'python'."""
    return backend_name
