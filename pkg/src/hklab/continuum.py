"""Continuous-agent HK dynamics on monotone piecewise-linear profiles.

A :class:`Profile` is the opinion function ``x(alpha)`` given by its values at
strictly increasing breakpoints, interpolated linearly.  The update

    x'(alpha) = mean of x over {beta : |x(beta) - x(alpha)| <= 1}

is evaluated in closed form: the neighbourhood is the interval ``[u, v]``
found by inverting ``x`` segment by segment, and the integral of a
piecewise-linear function is exact.  Plateaus resolve to the extreme
admissible abscissa (``u`` is an infimum, ``v`` a supremum).

The exact update of a piecewise-linear profile is piecewise rational, so
:func:`continuum_step` returns a piecewise-linear approximation with a
sup-norm tolerance; its breakpoint values are exact updates.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .numerics import Backend, PrecisionPolicy, as_ratio

__all__ = [
    "Profile",
    "NbhdBounds",
    "RefinementOverflow",
    "evaluate",
    "integral",
    "preimage_inf",
    "preimage_sup",
    "preimage",
    "bounds_uvw",
    "update_at",
    "update_many",
    "event_abscissae",
    "continuum_step",
    "derivative_next",
    "regularity_check",
    "profile_range",
    "segment_slopes",
    "simplify",
    "antisymmetrize",
    "antisymmetry_defect",
]

EXACT = PrecisionPolicy.exact()
DEFAULT_BUDGET = 10**6


class RefinementOverflow(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Profile:
    """Monotone piecewise-linear opinion function."""

    alphas: tuple
    values: tuple
    policy: PrecisionPolicy = EXACT
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        a = tuple(self.alphas)
        v = tuple(self.values)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "values", v)
        if len(a) != len(v):
            raise ValueError("alphas and values differ in length")
        if len(a) < 2:
            raise ValueError("a profile needs at least two breakpoints")
        for p, q in zip(a, a[1:]):
            if not p < q:
                raise ValueError("breakpoints must be strictly increasing")
        for p, q in zip(v, v[1:]):
            if q < p:
                raise ValueError("profile values must be nondecreasing")

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_points(cls, alphas: Iterable, values: Iterable, policy: PrecisionPolicy = EXACT):
        with policy.context():
            return cls(
                tuple(policy.scalar(x) for x in alphas),
                tuple(policy.scalar(x) for x in values),
                policy,
            )

    @classmethod
    def linear(cls, slope, domain=(0, 1), intercept=0, policy: PrecisionPolicy = EXACT):
        with policy.context():
            lo, hi = policy.scalar(domain[0]), policy.scalar(domain[1])
            s, c = policy.scalar(slope), policy.scalar(intercept)
            return cls((lo, hi), (c + s * lo, c + s * hi), policy)

    @classmethod
    def constant(cls, value, domain=(0, 1), policy: PrecisionPolicy = EXACT):
        with policy.context():
            c = policy.scalar(value)
            return cls((policy.scalar(domain[0]), policy.scalar(domain[1])), (c, c), policy)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Profile):
            return NotImplemented
        return (
            self.policy.backend is other.policy.backend
            and self.alphas == other.alphas
            and self.values == other.values
        )

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def start(self):
        return self.alphas[0]

    @property
    def end(self):
        return self.alphas[-1]

    @property
    def length(self):
        with self.policy.context():
            return self.alphas[-1] - self.alphas[0]

    @property
    def domain(self) -> tuple:
        return self.alphas[0], self.alphas[-1]

    def with_meta(self, **kw) -> "Profile":
        meta = dict(self.meta)
        meta.update(kw)
        return Profile(self.alphas, self.values, self.policy, meta)

    @cached_property
    def cumulative(self) -> list:
        """``C[k]`` = integral of x from the domain start to breakpoint ``k``."""
        if self.policy.backend is Backend.F64:
            return self.arrays[2].tolist()
        a, v = self.alphas, self.values
        out = [self.policy.zero()]
        with self.policy.context():
            acc = out[0]
            for k in range(len(a) - 1):
                acc = acc + (a[k + 1] - a[k]) * (v[k] + v[k + 1]) / 2
                out.append(acc)
        return out

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = np.asarray([float(x) for x in self.alphas], dtype=np.float64)
        v = np.asarray([float(x) for x in self.values], dtype=np.float64)
        C = np.zeros_like(a)
        C[1:] = np.cumsum((a[1:] - a[:-1]) * (v[:-1] + v[1:]) / 2.0)
        return a, v, C


@dataclass(frozen=True)
class NbhdBounds:
    """Neighbourhood ``[u, v]`` of one agent and its length ``w``."""

    u: object
    v: object
    w: object


# -- pointwise primitives ----------------------------------------------------


def _seg(p: Profile, t) -> int:
    k = bisect_right(p.alphas, t) - 1
    return min(max(k, 0), len(p.alphas) - 2)


def _interp(p: Profile, t, k: int):
    a, v = p.alphas, p.values
    return v[k] + (v[k + 1] - v[k]) * (t - a[k]) / (a[k + 1] - a[k])


def _check_domain(p: Profile, t) -> None:
    if t < p.alphas[0] or t > p.alphas[-1]:
        raise ValueError(f"abscissa {t} outside the domain [{p.alphas[0]}, {p.alphas[-1]}]")


def evaluate(p: Profile, alpha):
    """Linear interpolation; exact at breakpoints."""
    with p.policy.context():
        alpha = p.policy.scalar(alpha) if not isinstance(alpha, type(p.alphas[0])) else alpha
        _check_domain(p, alpha)
        k = _seg(p, alpha)
        if alpha == p.alphas[k]:
            return p.values[k]
        if alpha == p.alphas[k + 1]:
            return p.values[k + 1]
        return _interp(p, alpha, k)


def _prim(p: Profile, t):
    k = _seg(p, t)
    xt = _interp(p, t, k)
    return p.cumulative[k] + (t - p.alphas[k]) * (p.values[k] + xt) / 2


def integral(p: Profile, lo, hi):
    """Integral of the profile over ``[lo, hi]``."""
    with p.policy.context():
        return _prim(p, hi) - _prim(p, lo)


def _inv_lo(p: Profile, y):
    a, v = p.alphas, p.values
    if y <= v[0]:
        return a[0]
    k = bisect_left(v, y)
    if k >= len(v):
        return None
    return a[k - 1] + (y - v[k - 1]) * (a[k] - a[k - 1]) / (v[k] - v[k - 1])


def _inv_hi(p: Profile, y):
    a, v = p.alphas, p.values
    if y >= v[-1]:
        return a[-1]
    k = bisect_right(v, y)
    if k == 0:
        return None
    k -= 1
    return a[k] + (y - v[k]) * (a[k + 1] - a[k]) / (v[k + 1] - v[k])


def preimage_inf(p: Profile, y):
    """``inf{beta : x(beta) >= y}``; ``None`` when ``y`` exceeds the maximum."""
    with p.policy.context():
        return _inv_lo(p, y)


def preimage_sup(p: Profile, y):
    """``sup{beta : x(beta) <= y}``; ``None`` when ``y`` is below the minimum."""
    with p.policy.context():
        return _inv_hi(p, y)


def preimage(p: Profile, lo, hi):
    """Closed abscissa interval ``x^{-1}([lo, hi])``, or ``None`` if empty."""
    with p.policy.context():
        if hi < lo or hi < p.values[0] or lo > p.values[-1]:
            return None
        return _inv_lo(p, lo), _inv_hi(p, hi)


def _bounds(p: Profile, alpha):
    x = _interp(p, alpha, _seg(p, alpha))
    u = _inv_lo(p, x - 1)
    v = _inv_hi(p, x + 1)
    return x, u, v


def bounds_uvw(p: Profile, alpha) -> NbhdBounds:
    """Neighbourhood bounds of agent ``alpha``.

    ``u`` is the domain start when ``x(alpha) <= x(start) + 1`` and otherwise
    ``inf{beta : x(beta) >= x(alpha) - 1}``; ``v`` symmetrically.
    """
    with p.policy.context():
        alpha = p.policy.scalar(alpha)
        _check_domain(p, alpha)
        x = evaluate(p, alpha)
        u = p.alphas[0] if x <= p.values[0] + 1 else _inv_lo(p, x - 1)
        v = p.alphas[-1] if x >= p.values[-1] - 1 else _inv_hi(p, x + 1)
        return NbhdBounds(u, v, v - u)


def update_at(p: Profile, alpha):
    """Updated opinion of agent ``alpha``: mean of x over its neighbourhood."""
    with p.policy.context():
        alpha = p.policy.scalar(alpha)
        _check_domain(p, alpha)
        if p.policy.backend is Backend.F64:
            a, v, C = p.arrays
            return float(kernels.update_many_f64(a, v, C, np.array([alpha]))[0])
        _, u, v = _bounds(p, alpha)
        return (_prim(p, v) - _prim(p, u)) / (v - u)


def update_many(p: Profile, alphas: Sequence) -> list:
    """:func:`update_at` for many abscissae (vectorised in ``f64`` mode)."""
    if p.policy.backend is Backend.F64:
        a, v, C = p.arrays
        return kernels.update_many_f64(a, v, C, np.asarray(alphas, dtype=np.float64)).tolist()
    out = []
    with p.policy.context():
        for t in alphas:
            _, u, v = _bounds(p, t)
            out.append((_prim(p, v) - _prim(p, u)) / (v - u))
    return out


def profile_range(p: Profile):
    """``x(end) - x(start)``."""
    with p.policy.context():
        return p.values[-1] - p.values[0]


def segment_slopes(p: Profile) -> list:
    a, v = p.alphas, p.values
    with p.policy.context():
        return [(v[k + 1] - v[k]) / (a[k + 1] - a[k]) for k in range(len(a) - 1)]


def regularity_check(p: Profile):
    """``(min slope, max slope)``, or ``None`` if some segment is flat."""
    s = segment_slopes(p)
    if any(x == 0 for x in s):
        return None
    return min(s), max(s)


# -- one step of the continuum dynamics --------------------------------------


def event_abscissae(p: Profile) -> list:
    """Abscissae where the exact update can have a kink.

    These are the breakpoints themselves, the points where the left or right
    neighbourhood clause switches (``x = x(start) + 1``, ``x = x(end) - 1``),
    and the points where ``u`` or ``v`` crosses a breakpoint
    (``x = x(b) + 1`` or ``x = x(b) - 1``).  For a value attained on a plateau
    both plateau ends are returned.
    """
    pol = p.policy
    vals = p.values
    lo, hi = vals[0], vals[-1]
    with pol.context():
        ys = set()
        for y in vals:
            ys.add(y + 1)
            ys.add(y - 1)
        ys = sorted(y for y in ys if lo <= y <= hi)
        out = set(p.alphas)
        if pol.backend is Backend.F64:
            a, v, _ = p.arrays
            yarr = np.asarray(ys, dtype=np.float64)
            out.update(kernels.inv_lo_f64(a, v, yarr).tolist())
            out.update(kernels.inv_hi_f64(a, v, yarr).tolist())
        else:
            for y in ys:
                for b in (_inv_lo(p, y), _inv_hi(p, y)):
                    if b is not None:
                        out.add(b)
        a0, a1 = p.alphas[0], p.alphas[-1]
        return sorted(min(max(b, a0), a1) for b in out)


def _default_tol(p: Profile):
    pol = p.policy
    rng = profile_range(p)
    with pol.context():
        if pol.backend is Backend.F64:
            base = 1e-12
        elif pol.backend is Backend.BIGFLOAT:
            base = pol.scalar(Fraction(1, 2 ** (pol.bits // 2)))
        else:
            base = Fraction(1, 10**12)
        tol = base * rng
        return tol if tol > 0 else base


def continuum_step(
    p: Profile,
    tol=None,
    *,
    keep: Iterable = (),
    simplify_output: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> Profile:
    """Piecewise-linear approximation of the updated profile.

    Candidate breakpoints are the :func:`event_abscissae` (plus ``keep``);
    each interval whose midpoint update deviates from the chord by more than
    the tolerance is bisected.  With ``simplify_output`` half of ``tol`` goes
    to bisection and half to merging nearly collinear breakpoints (``keep``
    points are never merged away).  Breakpoint values are exact updates, up to
    a monotonicity repair of at most ``tol`` in floating modes.

    Raises :class:`RefinementOverflow` when more than ``budget`` breakpoints
    would be needed.
    """
    pol = p.policy
    if tol is None:
        tol = _default_tol(p)
    with pol.context():
        tol = pol.scalar(tol)
        if not tol > 0:
            raise ValueError("tol must be positive")
        a0, a1 = p.alphas[0], p.alphas[-1]

        if profile_range(p) <= 1:
            # everyone sees everyone: the next state is the global mean
            m = p.cumulative[-1] / (a1 - a0)
            return Profile((a0, a1), (m, m), pol, {"consensus": True, "evaluations": 0})

        keep = {pol.scalar(k) for k in keep}
        seeds = set(event_abscissae(p))
        seeds.update(k for k in keep if a0 <= k <= a1)
        pts = sorted(seeds)
        vals = update_many(p, pts)
        n_seed = len(pts)
        tol_b = tol / 2 if simplify_output else tol

        pending = list(zip(pts, vals, pts[1:], vals[1:]))
        new_pts: list = []
        new_vals: list = []
        unresolved = 0
        evaluations = len(pts)
        while pending:
            mids = []
            todo = []
            for a, va, b, vb in pending:
                mid = (a + b) / 2
                if not (a < mid < b):
                    unresolved += 1
                    continue
                mids.append(mid)
                todo.append((a, va, b, vb))
            if not mids:
                break
            mvals = update_many(p, mids)
            evaluations += len(mids)
            pending = []
            for (a, va, b, vb), mid, vm in zip(todo, mids, mvals):
                if abs(vm - (va + vb) / 2) > tol_b:
                    new_pts.append(mid)
                    new_vals.append(vm)
                    pending.append((a, va, mid, vm))
                    pending.append((mid, vm, b, vb))
            if n_seed + len(new_pts) > budget:
                raise RefinementOverflow("refinement overflow")

        order = sorted(zip(pts + new_pts, vals + new_vals), key=lambda t: t[0])
        alphas = [t[0] for t in order]
        values = [t[1] for t in order]

        fix = pol.zero()
        if pol.is_exact:
            for x, y in zip(values, values[1:]):
                if y < x:
                    raise AssertionError("exact update is not monotone")
        else:
            run = values[0]
            for i in range(1, len(values)):
                if values[i] < run:
                    fix = max(fix, run - values[i])
                    values[i] = run
                else:
                    run = values[i]
            if fix > tol:
                raise ArithmeticError(f"monotonicity repair {fix} exceeds tol")

        out = Profile(tuple(alphas), tuple(values), pol)
        if simplify_output:
            out = simplify(out, tol / 2, keep=keep)
        meta = {
            "seeds": n_seed,
            "refined": len(new_pts),
            "evaluations": evaluations,
            "unresolved": unresolved,
            "monotone_fix": fix,
            "tol": tol,
            "breakpoints": len(out),
            "plateau_convention": "inf/sup",
        }
        return out.with_meta(**meta)


def simplify(p: Profile, tol, keep: Iterable = ()) -> Profile:
    """Drop breakpoints while staying within ``tol`` of the input (sup norm).

    Greedy chord extension with a feasible-slope cone; kept breakpoints retain
    their values, so the error is attained at dropped breakpoints and is
    checked there exactly.
    """
    a, v = p.alphas, p.values
    n = len(a)
    keep = set(keep)
    with p.policy.context():
        idx = [0]
        i = 0
        while i < n - 1:
            lo = hi = None
            best = i + 1
            for k in range(i + 1, n):
                h = a[k] - a[i]
                s = (v[k] - v[i]) / h
                if (lo is None or s >= lo) and (hi is None or s <= hi):
                    best = k
                    if a[k] in keep:
                        break
                else:
                    break
                lk = (v[k] - tol - v[i]) / h
                hk = (v[k] + tol - v[i]) / h
                lo = lk if lo is None or lk > lo else lo
                hi = hk if hi is None or hk < hi else hi
                if lo > hi:
                    break
            idx.append(best)
            i = best
        return Profile(tuple(a[j] for j in idx), tuple(v[j] for j in idx), p.policy, dict(p.meta))


# -- derivative of the update ------------------------------------------------


def _slope_at(p: Profile, t):
    k = _seg(p, t)
    a, v = p.alphas, p.values
    return (v[k + 1] - v[k]) / (a[k + 1] - a[k])


def derivative_next(p: Profile, alpha, x_next=None):
    """Derivative of the updated profile at a smooth point ``alpha``.

    ``(u' (1 + x_next - x) + v' (1 + x - x_next)) / w`` with
    ``u' = x'(alpha) / x'(u)`` while the left clause is inactive (else 0) and
    ``v' = x'(alpha) / x'(v)`` likewise.  Raises ``ValueError("kink")`` at a
    breakpoint, a clause switch or when ``u``/``v`` sits on a breakpoint.
    """
    pol = p.policy
    with pol.context():
        alpha = pol.scalar(alpha)
        _check_domain(p, alpha)
        if alpha in set(p.alphas):
            raise ValueError("kink")
        if x_next is None:
            x_next = update_at(p, alpha)
        x = evaluate(p, alpha)
        dx = _slope_at(p, alpha)
        v0, vm = p.values[0], p.values[-1]
        brk = set(p.alphas)
        if x == v0 + 1 or x == vm - 1:
            raise ValueError("kink")
        if x < v0 + 1:
            u, du = p.alphas[0], pol.zero()
        else:
            u = _inv_lo(p, x - 1)
            if u in brk:
                raise ValueError("kink")
            du = dx / _slope_at(p, u)
        if x > vm - 1:
            v, dv = p.alphas[-1], pol.zero()
        else:
            v = _inv_hi(p, x + 1)
            if v in brk:
                raise ValueError("kink")
            dv = dx / _slope_at(p, v)
        w = v - u
        return (du * (1 + x_next - x) + dv * (1 + x - x_next)) / w


# -- antisymmetry ----------------------------------------------------------------


def antisymmetry_defect(p: Profile, center, center_value):
    """Largest ``|x(a) + x(2c - a) - 2 x_c| / 2`` over the breakpoints."""
    with p.policy.context():
        worst = p.policy.zero()
        two_c = 2 * center
        for a, v in zip(p.alphas, p.values):
            m = two_c - a
            if m < p.alphas[0] or m > p.alphas[-1]:
                continue
            d = abs(v + evaluate(p, m) - 2 * center_value) / 2
            if d > worst:
                worst = d
        return worst


def antisymmetrize(p: Profile, center, center_value) -> tuple[Profile, object]:
    """Average the profile with its point reflection about ``(c, x_c)``.

    The left half's breakpoints are kept and mirrored, so the result is exactly
    antisymmetric.  Returns the new profile and the defect before averaging.
    """
    pol = p.policy
    with pol.context():
        defect = antisymmetry_defect(p, center, center_value)
        two_c = 2 * center
        left_a = [a for a in p.alphas if a < center]
        left_v = [(evaluate(p, a) + 2 * center_value - evaluate(p, two_c - a)) / 2 for a in left_a]
        alphas = left_a + [center] + [two_c - a for a in reversed(left_a)]
        values = left_v + [center_value] + [2 * center_value - v for v in reversed(left_v)]
        # rounding in the average may break ties at the ulp level
        for i in range(1, len(values)):
            if values[i] < values[i - 1]:
                values[i] = values[i - 1]
        return Profile(tuple(alphas), tuple(values), pol, dict(p.meta)), defect


def exact_fraction(x) -> Fraction:
    return Fraction(*as_ratio(x))
