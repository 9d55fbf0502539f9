"""Backend selection for the hot kernels.

Set ``DECOPT_DISABLE_NUMBA=1`` to force the pure-numpy path. The numba path is
also skipped silently when numba cannot be imported.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except Exception:
        return False
    return True


NUMBA_DISABLED = os.environ.get("DECOPT_DISABLE_NUMBA", "").strip().lower() not in _FALSY
USE_NUMBA = (not NUMBA_DISABLED) and _numba_available()
BACKEND = "numba" if USE_NUMBA else "numpy"

__all__ = ["BACKEND", "USE_NUMBA", "NUMBA_DISABLED"]
