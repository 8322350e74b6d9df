"""Numerical kernel backends.

The hot path (the per-device proximal barrier solve and the fused
cost/derivative evaluations it needs) exists twice: a compiled Cython
extension and a pure-Python twin with identical arithmetic.  The compiled
one is used when available; set ``MECGAME_BACKEND=python`` to force the
fallback (e.g. for benchmarking or debugging).
"""

import os

from ._layout import (  # noqa: F401  (re-exported)
    DEV_LAM, DEV_C, DEV_Z, DEV_FMD, DEV_EPSL, DEV_EPSTX, DEV_DMAX, DEV_EMAX,
    DEV_PMAX, DEV_THD, DEV_THE, DEV_THP, DEV_R, DEV_S2, DEV_LEN,
    STATUS_OK, STATUS_SATURATED, SOLVE_OK, SOLVE_INFEASIBLE,
    SOLVE_NO_CONVERGENCE,
)
from . import _kernel_py


def available_backends():
    names = ["python"]
    try:
        from . import _kernel_cy  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get_kernel(name):
    """Kernel module by backend name ("compiled" or "python")."""
    if name == "python":
        return _kernel_py
    if name == "compiled":
        from . import _kernel_cy
        return _kernel_cy
    raise ValueError(f"unknown backend {name!r}")


_forced = os.environ.get("MECGAME_BACKEND", "").strip().lower()
if _forced:
    kernel = get_kernel(_forced)
    BACKEND = _forced
else:
    try:
        from . import _kernel_cy as kernel
        BACKEND = "compiled"
    except ImportError:
        kernel = _kernel_py
        BACKEND = "python"
