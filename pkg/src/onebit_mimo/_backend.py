"""Kernel backend selection.

The compiled extension is preferred when present; the pure-python mirror
is the fallback.  ``ONEBIT_MIMO_BACKEND=python`` or ``=compiled`` forces
the choice (the latter raises if the extension was never built).
"""

import os

_choice = os.environ.get("ONEBIT_MIMO_BACKEND", "").strip().lower()
if _choice not in ("", "compiled", "python"):
    raise ImportError(
        "ONEBIT_MIMO_BACKEND must be 'compiled' or 'python', got %r" % (_choice,)
    )

if _choice == "python":
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        from . import _kernels_py as kernels  # type: ignore[no-redef]

        BACKEND = "python"
