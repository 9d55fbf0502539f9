"""Hot per-node kernels, dispatched to numba or numpy at import time.

``numpy_impl`` is always importable; ``numba_impl`` is ``None`` when numba is
unavailable. The module-level names point at whichever backend is active.
"""

from __future__ import annotations

from .. import _backend
from . import _numpy as numpy_impl
from ._numpy import (
    CG_DY,
    CG_FR,
    CG_HS,
    CG_PRP,
    FLAG_CHECK,
    FLAG_DEGENERATE,
    FLAG_HAT,
    REG_L2,
    REG_NONCONVEX,
    REG_NONE,
)

DENOM_FLOOR = 1e-300

try:
    from . import _numba as numba_impl
except Exception:  # pragma: no cover - numba missing or broken
    numba_impl = None

impl = numba_impl if (_backend.USE_NUMBA and numba_impl is not None) else numpy_impl
BACKEND = "numba" if impl is numba_impl else "numpy"

quad_grad = impl.quad_grad
quad_values = impl.quad_values
logistic_grad = impl.logistic_grad
logistic_values = impl.logistic_values
ndcg_direction = impl.ndcg_direction
sdcg_direction = impl.sdcg_direction
dmbfgs_directions = impl.dmbfgs_directions

__all__ = [
    "BACKEND",
    "DENOM_FLOOR",
    "impl",
    "numpy_impl",
    "numba_impl",
    "quad_grad",
    "quad_values",
    "logistic_grad",
    "logistic_values",
    "ndcg_direction",
    "sdcg_direction",
    "dmbfgs_directions",
    "CG_FR",
    "CG_PRP",
    "CG_HS",
    "CG_DY",
    "REG_NONE",
    "REG_L2",
    "REG_NONCONVEX",
    "FLAG_CHECK",
    "FLAG_HAT",
    "FLAG_DEGENERATE",
]
