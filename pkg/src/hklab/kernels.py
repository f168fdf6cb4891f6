"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``HKLAB_PURE_PYTHON=1`` to force the fallback.  Both paths obey the same
arithmetic contract, so results are identical bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels as _py

COMPILED = False
_c = None
if not os.environ.get("HKLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as _c  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:  # pragma: no cover - depends on the build
        _c = None

inv_lo_f64 = _py.inv_lo_f64
inv_hi_f64 = _py.inv_hi_f64


def _as_f64(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def hk_step_f64(x) -> np.ndarray:
    x = _as_f64(x)
    if _c is not None:
        out = _c.hk_step_f64(x)
        if out is not None:
            return out
    return _py.hk_step_f64(x)


def run_f64(x, max_steps: int):
    """Run to the floating stop rule; returns ``(final, steps, reached)``."""
    x = _as_f64(x)
    if _c is not None:
        res = _c.run_f64(x, int(max_steps))
        if res is not None:
            return res
    return _py.run_f64(x, int(max_steps))


def update_many_f64(a, v, C, t) -> np.ndarray:
    a, v, C, t = _as_f64(a), _as_f64(v), _as_f64(C), _as_f64(t)
    if _c is not None:
        return _c.update_many_f64(a, v, C, t)
    return _py.update_many_f64(a, v, C, t)


def backend_name() -> str:
    return "compiled" if COMPILED else "python"
