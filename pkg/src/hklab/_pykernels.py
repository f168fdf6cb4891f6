"""Pure-Python fallbacks for the float64 kernels.

Same arithmetic contract as the compiled module: exact integer lattice for the
discrete step (Python ints never overflow, so these never return ``None``) and
the same floating-point expression order for the continuum update.
"""

from __future__ import annotations

import numpy as np

EPS = 2.0**-52


def _lattice(x) -> tuple[list[int], int]:
    ratios = [float(v).as_integer_ratio() for v in x]
    den = max(d for _, d in ratios)
    return [n * (den // d) for n, d in ratios], den


def hk_step_f64(x: np.ndarray) -> np.ndarray:
    nums, den = _lattice(x)
    n = len(nums)
    prefix = [0] * (n + 1)
    for i, v in enumerate(nums):
        prefix[i + 1] = prefix[i] + v
    out = np.empty(n, dtype=np.float64)
    lo = hi = 0
    for i in range(n):
        xi = nums[i]
        while xi - nums[lo] > den:
            lo += 1
        if hi < i:
            hi = i
        while hi + 1 < n and nums[hi + 1] - xi <= den:
            hi += 1
        out[i] = (prefix[hi + 1] - prefix[lo]) / (den * (hi - lo + 1))
    return out


def cluster_equilibrium_f64(x: np.ndarray) -> bool:
    xs = [float(v) for v in x]
    nums, den = _lattice(xs)
    scale = max(abs(xs[0]), abs(xs[-1]))
    tol = 1e6 * EPS * scale
    start = 0
    prev = None
    n = len(xs)
    for i in range(1, n + 1):
        if i < n and xs[i] - xs[i - 1] <= tol:
            continue
        c = sum(nums[start:i]) / (den * (i - start))
        if prev is not None and not (c - prev > 1.0):
            return False
        prev = c
        start = i
    return True


def run_f64(x: np.ndarray, max_steps: int):
    cur = np.array(x, dtype=np.float64)
    steps = 0
    eq = cluster_equilibrium_f64(cur)
    while not eq and steps < max_steps:
        cur = hk_step_f64(cur)
        steps += 1
        eq = cluster_equilibrium_f64(cur)
    return cur, steps, eq


def _seg(a: np.ndarray, t: np.ndarray) -> np.ndarray:
    m = len(a) - 1
    return np.clip(np.searchsorted(a, t, side="right") - 1, 0, m - 1)


def _eval(a, v, t, k):
    return v[k] + (v[k + 1] - v[k]) * (t - a[k]) / (a[k + 1] - a[k])


def _prim(a, v, C, t):
    k = _seg(a, t)
    xt = _eval(a, v, t, k)
    return C[k] + (t - a[k]) * (v[k] + xt) / 2.0


def inv_lo_f64(a: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised ``inf{b : x(b) >= y}``."""
    m = len(a) - 1
    y = np.asarray(y, dtype=np.float64)
    k = np.searchsorted(v, y, side="left")
    kk = np.clip(k - 1, 0, m - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = a[kk] + (y - v[kk]) * (a[kk + 1] - a[kk]) / (v[kk + 1] - v[kk])
    out = np.where(y <= v[0], a[0], np.where(k > m, a[m], inner))
    return out


def inv_hi_f64(a: np.ndarray, v: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised ``sup{b : x(b) <= y}``."""
    m = len(a) - 1
    y = np.asarray(y, dtype=np.float64)
    k = np.searchsorted(v, y, side="right")
    kk = np.clip(k - 1, 0, m - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = a[kk] + (y - v[kk]) * (a[kk + 1] - a[kk]) / (v[kk + 1] - v[kk])
    out = np.where(y >= v[m], a[m], np.where(k == 0, a[0], inner))
    return out


def update_many_f64(a: np.ndarray, v: np.ndarray, C: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.size == 0:
        return np.empty(0, dtype=np.float64)
    k = _seg(a, t)
    x = _eval(a, v, t, k)
    u = inv_lo_f64(a, v, x - 1.0)
    w = inv_hi_f64(a, v, x + 1.0)
    return (_prim(a, v, C, w) - _prim(a, v, C, u)) / (w - u)
