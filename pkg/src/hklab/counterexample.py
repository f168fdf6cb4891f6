"""Double-S initial profile whose opinion range never falls to 2.

The profile lives on ``[0, 2 + eps^2 + 2 eps^4]`` and is linear on five
pieces: a long shallow tail ``A`` (length 1, opinions ``[0, eps]``), a very
steep strip ``B`` (length ``eps^4``, opinions ``[eps, eps + d]``), a narrow
central piece ``C`` (length ``eps^2``, opinions ``[eps + d, 2 eps + d]``) and
the point reflections ``D``, ``E`` of ``B``, ``A`` about the centre.

Each step is certified by measuring, on the evolved profile,

    I    A is contained in A_t = x_t^{-1}([0, 2 eps])
    II   B_t = x_t^{-1}([2 eps, eps + d]) is contained in B
    III  x_t(A) is contained in [0, eps]
    IV   the slope of x_t on A is at most e_t
    V    the slope of x_t on B_t is at least s_t
    VI   eps - mean(x_t on A) > 2 eps^2

with the bounds ``e_t, s_t`` propagated by :func:`lemma_recursion`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import gmpy2

from .continuum import (
    Profile,
    antisymmetrize,
    continuum_step,
    evaluate,
    integral,
    preimage,
    profile_range,
    segment_slopes,
)
from .numerics import Backend, PrecisionPolicy, as_ratio

__all__ = [
    "DoubleSParams",
    "Certificate",
    "PrecisionExhausted",
    "build_double_s",
    "agent_sets",
    "verify_assumptions",
    "lemma_recursion",
    "mean_increment_bound",
    "limit_mean_bound",
    "chain_mean_bound",
    "epsilon_guards",
    "predicted_bounds",
    "run_counterexample",
    "DEFAULT_TOL",
]

# absolute per-step approximation tolerance of the evolved profile
DEFAULT_TOL = Fraction(1, 10**9)


class PrecisionExhausted(ArithmeticError):
    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"precision exhausted at step {step}" + (f": {detail}" if detail else ""))


def _frac(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(*as_ratio(x))


@dataclass(frozen=True)
class DoubleSParams:
    """Shape parameters; ``|A| = 1``, ``|B| = eps^4``, ``|C| = eps^2``."""

    epsilon: Fraction
    d: Fraction = Fraction(3, 2)

    def __post_init__(self) -> None:
        eps, d = _frac(self.epsilon), _frac(self.d)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "d", d)
        if not 0 < eps <= Fraction(1, 4):
            raise ValueError(f"epsilon must lie in (0, 1/4], got {eps}")
        if not 1 < d < 2:
            raise ValueError(f"d must lie in (1, 2), got {d}")

    @property
    def len_a(self) -> Fraction:
        return Fraction(1)

    @property
    def len_b(self) -> Fraction:
        return self.epsilon**4

    @property
    def len_c(self) -> Fraction:
        return self.epsilon**2

    @property
    def center(self) -> Fraction:
        return 1 + self.len_b + self.len_c / 2

    @property
    def domain_end(self) -> Fraction:
        return 2 * self.center

    @property
    def center_value(self) -> Fraction:
        return self.d + 3 * self.epsilon / 2

    @property
    def interval_a(self) -> tuple[Fraction, Fraction]:
        return Fraction(0), Fraction(1)

    @property
    def interval_b(self) -> tuple[Fraction, Fraction]:
        return Fraction(1), 1 + self.len_b

    def protected_points(self) -> tuple[Fraction, ...]:
        """Abscissae kept as breakpoints in every step (ends of A, B and mirrors)."""
        c2 = self.domain_end
        pts = (Fraction(1), 1 + self.len_b, self.center)
        return tuple(sorted(set(pts) | {c2 - p for p in pts}))


def build_double_s(params: DoubleSParams, policy: PrecisionPolicy | None = None) -> Profile:
    """Initial double-S profile, antisymmetric about its centre."""
    policy = policy or PrecisionPolicy.exact()
    eps, d = params.epsilon, params.d
    left_a = [Fraction(0), Fraction(1), 1 + params.len_b]
    left_v = [Fraction(0), eps, d + eps]
    c, xc = params.center, params.center_value
    alphas = left_a + [c] + [2 * c - a for a in reversed(left_a)]
    values = left_v + [xc] + [2 * xc - v for v in reversed(left_v)]
    return Profile.from_points(alphas, values, policy)


def agent_sets(p: Profile, epsilon) -> tuple:
    """``(A_t, B_t, image of A)`` as closed intervals (``None`` when empty).

    ``A_t = x^{-1}([0, 2 eps])``, ``B_t = x^{-1}([2 eps, eps + d])`` where ``d``
    is read off the profile's antisymmetric shape as ``x(end)/2 - 3 eps / 2``.
    """
    pol = p.policy
    with pol.context():
        eps = pol.scalar(epsilon)
        d = (p.values[-1] + p.values[0]) / 2 - 3 * eps / 2
        return _agent_sets(p, eps, d)


def _agent_sets(p: Profile, eps, d, a_end=1):
    a_t = preimage(p, 0 * eps, 2 * eps)
    b_t = preimage(p, 2 * eps, eps + d)
    lo = p.alphas[0]
    hi = min(p.policy.scalar(a_end), p.alphas[-1])
    image = (evaluate(p, lo), evaluate(p, hi))
    return a_t, b_t, image


def lemma_recursion(e, s, epsilon, d=Fraction(3, 2)) -> tuple:
    """Propagate the slope bounds one step.

    Returns ``(2 e / s, eps s / (2 e), d / s_next)``: the bound on the slope over
    ``A``, the bound on the slope over ``B_t`` and the resulting bound on
    ``|B_{t+1}|``.
    """
    if not (e > 0 and s > 0 and epsilon > 0 and d > 0):
        raise ValueError("lemma_recursion needs positive inputs")
    e_next = 2 * e / s
    s_next = epsilon * s / (2 * e)
    return e_next, s_next, d / s_next


def mean_increment_bound(b_measure):
    """Largest possible growth of the mean over A in one step: ``4 |B_t|``."""
    if b_measure < 0:
        raise ValueError("measure must be nonnegative")
    return 4 * b_measure


def limit_mean_bound(epsilon, d=Fraction(3, 2)) -> tuple[Fraction, bool]:
    """Summed increment bound for the mean over A, checked exactly.

    Returns ``(eps/2 + 4 eps^4 + 8 eps^4 / (1 - 4 eps^5 / d), bound < eps - 2 eps^2)``.
    """
    eps, d = _frac(epsilon), _frac(d)
    q = 4 * eps**5 / d
    if q >= 1:
        raise ValueError("4 eps^5 / d must be below 1")
    bound = eps / 2 + 4 * eps**4 + 8 * eps**4 / (1 - q)
    return bound, bound < eps - 2 * eps**2


def chain_mean_bound(epsilon, d=Fraction(3, 2)) -> tuple[Fraction, bool]:
    """Summed increment bound implied by :func:`lemma_recursion` itself.

    From ``t = 1`` on the recursion multiplies ``s_t`` by at least
    ``d / (4 eps^4)``, so ``|B_t| <= 2 eps^4 (4 eps^4 / d)^(t - 1)`` and the
    increments sum to at most ``4 eps^4 + 8 eps^4 / (1 - 4 eps^4 / d)``.
    Returns ``(eps/2 + that sum, bound < eps - 2 eps^2)``.
    """
    eps, d = _frac(epsilon), _frac(d)
    q = 4 * eps**4 / d
    if q >= 1:
        raise ValueError("4 eps^4 / d must be below 1")
    bound = eps / 2 + 4 * eps**4 + 8 * eps**4 / (1 - q)
    return bound, bound < eps - 2 * eps**2


def epsilon_guards(epsilon, d=Fraction(3, 2)) -> dict[str, bool]:
    """Smallness conditions on eps used by the slope bounds.

    ``center_gap``: ``3 eps / 2 + d >= (eps + d)(2 eps^2 + 1)``, which for
    ``d = 3/2`` is ``eps <= (sqrt(13) - 3) / 4``.
    """
    eps, d = _frac(epsilon), _frac(d)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    return {
        "center_gap": 3 * eps / 2 + d >= (eps + d) * (2 * eps**2 + 1),
        "eps_le_tenth": eps <= Fraction(1, 10),
        "eps_le_quarter": eps <= Fraction(1, 4),
    }


def predicted_bounds(params: DoubleSParams, steps: int) -> list[tuple]:
    """``(e_t, s_t, bound on |B_t|)`` for ``t = 0..steps``, exact."""
    eps, d = params.epsilon, params.d
    e, s = eps, d / params.len_b
    out = [(e, s, params.len_b)]
    for _ in range(steps):
        e, s, b = lemma_recursion(e, s, eps, d)
        out.append((e, s, b))
    return out


@dataclass
class Certificate:
    t: int
    e_meas: Any
    s_meas: Any
    e_bound: Any
    s_bound: Any
    A_measure: Any
    B_measure: Any
    A_mean: Any
    range: Any
    assumptions: dict
    checks: dict = field(default_factory=dict)
    passed: bool = False
    advisory: bool = False
    resolution_limited: bool = False
    symmetry_defect: Any = 0
    breakpoints: int = 0
    skipped: list = field(default_factory=list)
    A_interval: tuple | None = None
    B_interval: tuple | None = None
    B_next_max: Any = None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "range": self.range,
            "assumptions": dict(self.assumptions),
            "e_meas": self.e_meas,
            "s_meas": self.s_meas,
            "e_bound": self.e_bound,
            "s_bound": self.s_bound,
            "A_measure": self.A_measure,
            "A_mean": self.A_mean,
            "B_measure": self.B_measure,
            "checks": dict(self.checks),
            "advisory": self.advisory,
            "resolution_limited": self.resolution_limited,
            "symmetry_defect": self.symmetry_defect,
            "breakpoints": self.breakpoints,
            "skipped": list(self.skipped),
            "pass": self.passed,
        }


def _usable(x) -> bool:
    if x is None or not x > 0:
        return False
    if isinstance(x, float):
        return math.isfinite(x)
    if type(x).__name__ == "mpfr":
        return bool(gmpy2.is_finite(x))
    return True


def _slope_extreme(p: Profile, slopes: list, lo, hi, pick):
    """``pick`` (min or max) of slopes of segments meeting ``(lo, hi)`` in positive length."""
    a = p.alphas
    sel = [s for k, s in enumerate(slopes) if a[k] < hi and a[k + 1] > lo]
    if not sel:
        return None
    return pick(sel)


def verify_assumptions(
    p: Profile,
    params: DoubleSParams,
    prev: Certificate | None = None,
    *,
    t: int | None = None,
    symmetry_defect=0,
    tol=None,
) -> Certificate:
    """Measure assumptions I-VI and the bound chain on profile ``p``.

    Failures are recorded in the certificate, never raised.
    """
    pol = p.policy
    with pol.context():
        sc = pol.scalar
        eps, d = sc(params.epsilon), sc(params.d)
        a_lo, a_hi = sc(0), sc(1)
        b_lo, b_hi = sc(params.interval_b[0]), sc(params.interval_b[1])
        A_t, B_t, img = _agent_sets(p, eps, d)
        slopes = segment_slopes(p)

        if prev is None:
            t = 0 if t is None else t
            e_bound, s_bound = eps, d / sc(params.len_b)
            b_next_max = None
        else:
            t = prev.t + 1 if t is None else t
            e_bound = s_bound = b_next_max = None
            if _usable(prev.e_bound) and _usable(prev.s_bound):
                e_bound, s_bound, b_next_max = lemma_recursion(prev.e_bound, prev.s_bound, eps, d)
                if not (_usable(e_bound) and _usable(s_bound)):
                    # the chain left the floating range: bounds are unavailable from here on
                    e_bound = s_bound = b_next_max = None

        e_meas = _slope_extreme(p, slopes, a_lo, a_hi, max)
        s_meas = None
        b_measure = sc(0)
        if B_t is not None:
            b_measure = B_t[1] - B_t[0]
            if b_measure > 0:
                s_meas = _slope_extreme(p, slopes, B_t[0], B_t[1], min)
        a_measure = A_t[1] - A_t[0] if A_t is not None else sc(0)
        a_mean = integral(p, a_lo, a_hi) / (a_hi - a_lo)
        rng = profile_range(p)

        assumptions = {
            "I": A_t is not None and A_t[0] <= a_lo and A_t[1] >= a_hi,
            "II": B_t is not None and B_t[0] >= b_lo and B_t[1] <= b_hi,
            "III": img[0] >= 0 and img[1] <= eps,
            "IV": None if e_bound is None else (e_meas is not None and e_meas <= e_bound),
            "V": None if s_bound is None else (s_meas is not None and s_meas >= s_bound),
            "VI": eps - a_mean > 2 * eps**2,
        }

        checks: dict[str, bool] = {"range_gt_2": rng > 2}
        xc = evaluate(p, sc(params.center))
        c_tol = sc(tol) if tol is not None else sc(0)
        checks["center_value"] = abs(xc - sc(params.center_value)) <= c_tol
        checks["symmetry"] = symmetry_defect <= c_tol
        if prev is not None:
            checks["A_grows"] = A_t is not None and prev.A_interval is not None and (
                A_t[0] <= prev.A_interval[0] and A_t[1] >= prev.A_interval[1]
            )
            checks["B_shrinks"] = B_t is not None and prev.B_interval is not None and (
                B_t[0] >= prev.B_interval[0] and B_t[1] <= prev.B_interval[1]
            )
            inc = a_mean - prev.A_mean
            # the mean over A moves only by the approximation error or upwards
            checks["mean_nondecreasing"] = inc >= -c_tol
            checks["mean_increment"] = inc <= mean_increment_bound(prev.B_measure) + c_tol
            checks["B_measure_bound"] = None if b_next_max is None else b_measure <= b_next_max

        resolution_limited = False
        advisory = False
        if B_t is not None and not pol.is_exact:
            length = p.alphas[-1] - p.alphas[0]
            ulp_rel = sc(2) ** (-(pol.bits - 13))
            if b_measure < ulp_rel * length:
                if pol.backend is Backend.F64:
                    advisory = True
                resolution_limited = True
        if prev is not None and prev.advisory:
            advisory = True

        skipped: list[str] = []
        if prev is not None:
            # the same recursion applied to the measured extremes is much tighter
            # than the propagated chain; it is only meaningful while B_t is resolved
            usable = (
                prev.e_meas is not None and prev.s_meas is not None
                and e_meas is not None and s_meas is not None
                and prev.e_meas > 0
            )
            if usable and not (resolution_limited or prev.resolution_limited):
                e_m, s_m, _ = lemma_recursion(prev.e_meas, prev.s_meas, eps, d)
                checks["measured_recursion"] = e_meas <= e_m and s_meas >= s_m
            else:
                skipped.append("measured_recursion")

        # None marks a check that could not be evaluated; such a step is not certified
        passed = all(v is True for v in assumptions.values()) and all(v is True for v in checks.values())

        return Certificate(
            t=t,
            e_meas=e_meas,
            s_meas=s_meas,
            e_bound=e_bound,
            s_bound=s_bound,
            A_measure=a_measure,
            B_measure=b_measure,
            A_mean=a_mean,
            range=rng,
            assumptions=assumptions,
            checks=checks,
            passed=passed,
            advisory=advisory,
            resolution_limited=resolution_limited,
            symmetry_defect=symmetry_defect,
            breakpoints=len(p),
            skipped=skipped,
            A_interval=A_t,
            B_interval=B_t,
            B_next_max=b_next_max,
        )


def run_counterexample(
    params: DoubleSParams,
    T: int,
    policy: PrecisionPolicy | None = None,
    tol=None,
    *,
    certify: bool = True,
    budget: int = 10**6,
    progress=None,
) -> list[Certificate]:
    """Evolve the double-S profile ``T`` steps and certify every step.

    Returns ``T + 1`` certificates (``t = 0..T``).  After each step the profile
    is made exactly antisymmetric by averaging with its reflection; the defect
    before averaging is recorded.  In ``certify`` mode the run refuses
    (:class:`PrecisionExhausted`) when the working precision cannot resolve the
    predicted width of ``B_t``, and requires ``eps <= 1/100`` and an exact or
    bigfloat backend.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    policy = policy or PrecisionPolicy.bigfloat(512)
    if certify:
        if params.epsilon > Fraction(1, 100):
            raise ValueError("certification requires epsilon <= 1/100")
        if policy.backend is Backend.F64:
            raise ValueError("certification requires the exact or bigfloat backend")
        if not policy.is_exact:
            unit = Fraction(1, 2**policy.bits)
            for step, (_, _, b) in enumerate(predicted_bounds(params, T)):
                if unit > b / 1000:
                    raise PrecisionExhausted(step, f"2^-{policy.bits} exceeds |B_t| bound / 1000")
    tol = DEFAULT_TOL if tol is None else tol

    with policy.context():
        tol_s = policy.scalar(tol)
        p = build_double_s(params, policy)
        c, xc = policy.scalar(params.center), policy.scalar(params.center_value)
        keep = [policy.scalar(k) for k in params.protected_points()]
        cert = verify_assumptions(p, params, None, tol=tol_s)
        certs = [cert]
        if progress:
            progress(cert, p)
        for t in range(1, T + 1):
            if profile_range(p) <= 1:
                break
            q = continuum_step(p, tol_s, keep=keep, budget=budget)
            p, defect = antisymmetrize(q, c, xc)
            cert = verify_assumptions(p, params, cert, t=t, symmetry_defect=defect, tol=tol_s)
            certs.append(cert)
            if progress:
                progress(cert, p)
        return certs


def certificates_pass(certs: list[Certificate]) -> bool:
    return bool(certs) and all(c.passed for c in certs)


def log10_abs(x) -> float:
    """``log10 |x|`` for any backend value (handles magnitudes beyond float range)."""
    n, d = as_ratio(x)
    if n == 0:
        return -math.inf
    return math.log10(abs(n)) - math.log10(d)
