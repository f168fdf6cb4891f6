"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Both paths are checked for identical output before timing.
"""

import argparse
import time

import numpy as np

from hklab import _pykernels as py
from hklab import kernels

try:
    from hklab import _ckernels as ck
except ImportError:
    ck = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def profile_arrays(m, rng):
    a = np.linspace(0.0, 1.0, m + 1)
    v = np.cumsum(np.concatenate([[0.0], rng.random(m)]))
    v *= 4.0 / v[-1]
    C = np.zeros_like(a)
    C[1:] = np.cumsum((a[1:] - a[:-1]) * (v[:-1] + v[1:]) / 2.0)
    return a, v, C


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if ck is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    rows = []

    for n in (1_000, 10_000, 100_000):
        x = np.sort(rng.random(n) * 20.0)
        assert np.array_equal(ck.hk_step_f64(x), py.hk_step_f64(x))
        tc = best_of(lambda: ck.hk_step_f64(x), args.repeat)
        tp = best_of(lambda: py.hk_step_f64(x), args.repeat)
        rows.append((f"hk_step N={n}", tc, tp))

    for n in (200, 800):
        x = np.arange(1.0, n + 1.0)
        rc, rp = ck.run_f64(x, 10 * n + 100), py.run_f64(x, 10 * n + 100)
        assert np.array_equal(rc[0], rp[0]) and rc[1:] == rp[1:]
        tc = best_of(lambda: ck.run_f64(x, 10 * n + 100), args.repeat)
        tp = best_of(lambda: py.run_f64(x, 10 * n + 100), args.repeat)
        rows.append((f"run E_N N={n}", tc, tp))

    for m in (1_000, 100_000):
        a, v, C = profile_arrays(m, rng)
        t = rng.random(200_000)
        assert np.array_equal(ck.update_many_f64(a, v, C, t), py.update_many_f64(a, v, C, t))
        tc = best_of(lambda: ck.update_many_f64(a, v, C, t), args.repeat)
        tp = best_of(lambda: py.update_many_f64(a, v, C, t), args.repeat)
        rows.append((f"update 2e5 pts, m={m}", tc, tp))

    print(f"active kernels: {kernels.backend_name()}")
    print(f"{'case':<26}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, tc, tp in rows:
        print(f"{name:<26}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
