"""Scalar backends and the precision policy shared by every engine.

Three backends are supported:

``exact``
    :class:`fractions.Fraction` (always in lowest terms, positive denominator).
``f64``
    Python ``float`` (IEEE double).
``bigfloat``
    :class:`gmpy2.mpfr` with a configurable mantissa width.

Scalars are plain Python numbers; the policy knows how to create them, how to
compare them and how to render them.  Everything that produces ``mpfr`` values
must run inside :meth:`PrecisionPolicy.context`.
"""

from __future__ import annotations

import contextlib
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import gmpy2

__all__ = [
    "Backend",
    "PrecisionPolicy",
    "backend_of",
    "mean",
    "approx_eq",
    "as_ratio",
    "to_str",
    "to_decimal",
    "parse_scalar",
]


class Backend(str, enum.Enum):
    EXACT = "exact"
    F64 = "f64"
    BIGFLOAT = "bigfloat"


_MPFR = type(gmpy2.mpfr(0))
_MPQ = type(gmpy2.mpq(0))


def backend_of(x: Any) -> Backend:
    """Classify a scalar by its Python type."""
    if isinstance(x, _MPFR):
        return Backend.BIGFLOAT
    if isinstance(x, float):
        return Backend.F64
    if isinstance(x, (Fraction, int, _MPQ)) and not isinstance(x, bool):
        return Backend.EXACT
    raise TypeError(f"not a scalar: {x!r}")


@dataclass(frozen=True)
class PrecisionPolicy:
    """Backend selector plus comparison tolerance.

    ``tol`` is the absolute comparison tolerance used by :func:`approx_eq`;
    it is zero exactly in exact mode.  When left as ``None`` it defaults to
    ``1e-12`` for doubles and ``2**-(bits // 2)`` for bigfloats.
    """

    backend: Backend = Backend.EXACT
    bits: int = 256
    tol: Any = field(default=None)

    def __post_init__(self) -> None:
        backend = Backend(self.backend)
        object.__setattr__(self, "backend", backend)
        if backend is Backend.BIGFLOAT and self.bits < 64:
            raise ValueError("bigfloat precision must be at least 64 bits")
        if backend is Backend.F64:
            object.__setattr__(self, "bits", 53)
        tol = self.tol
        if tol is None:
            tol = {
                Backend.EXACT: Fraction(0),
                Backend.F64: 1e-12,
                Backend.BIGFLOAT: Fraction(1, 2 ** (self.bits // 2)),
            }[backend]
        tol = Fraction(tol) if backend is Backend.EXACT else tol
        if tol < 0:
            raise ValueError("tolerance must be nonnegative")
        if (tol == 0) != (backend is Backend.EXACT):
            raise ValueError("tolerance is zero exactly when the backend is exact")
        object.__setattr__(self, "tol", tol)

    # -- constructors -----------------------------------------------------
    @classmethod
    def exact(cls) -> "PrecisionPolicy":
        return cls(Backend.EXACT)

    @classmethod
    def f64(cls, tol: float = 1e-12) -> "PrecisionPolicy":
        return cls(Backend.F64, tol=tol)

    @classmethod
    def bigfloat(cls, bits: int = 256, tol: Any = None) -> "PrecisionPolicy":
        return cls(Backend.BIGFLOAT, bits=bits, tol=tol)

    # -- scalar handling --------------------------------------------------
    @property
    def is_exact(self) -> bool:
        return self.backend is Backend.EXACT

    @property
    def mantissa_bits(self) -> int | None:
        """Significand width, or ``None`` for exact arithmetic."""
        return None if self.is_exact else self.bits

    def context(self):
        """Context manager that sets the mpfr working precision."""
        if self.backend is Backend.BIGFLOAT:
            return gmpy2.context(gmpy2.get_context(), precision=self.bits)
        return contextlib.nullcontext()

    def scalar(self, x: Any):
        """Convert ``x`` (number or string) into this backend.

        Strings accept ``"p/q"`` and decimal notation; decimal strings are read
        exactly in exact mode, so ``"0.01"`` becomes ``1/100``.
        """
        if self.backend is Backend.EXACT:
            if isinstance(x, str):
                return Fraction(x.strip())
            if isinstance(x, _MPFR):
                return Fraction(*x.as_integer_ratio())
            if isinstance(x, _MPQ):
                return Fraction(int(x.numerator), int(x.denominator))
            return Fraction(x)
        if self.backend is Backend.F64:
            if isinstance(x, str):
                return float(Fraction(x.strip()))
            if isinstance(x, _MPQ):
                return float(Fraction(int(x.numerator), int(x.denominator)))
            return float(x)
        with self.context():
            if isinstance(x, str):
                s = x.strip()
                if "/" in s:
                    return gmpy2.mpfr(gmpy2.mpq(s))
                return gmpy2.mpfr(s)
            if isinstance(x, Fraction):
                return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
            if isinstance(x, _MPFR):
                return gmpy2.mpfr(x)
            return gmpy2.mpfr(x)

    def from_ratio(self, num: int, den: int):
        """Correctly rounded value of ``num/den``."""
        if self.backend is Backend.EXACT:
            return Fraction(num, den)
        if self.backend is Backend.F64:
            return num / den
        with self.context():
            return gmpy2.mpfr(gmpy2.mpq(num, den))

    def zero(self):
        return self.scalar(0)

    def one(self):
        return self.scalar(1)

    def digits(self) -> int:
        """Significant decimal digits used when printing."""
        if self.backend is Backend.F64:
            return 17
        if self.backend is Backend.BIGFLOAT:
            return max(17, int(self.bits * math.log10(2)))
        return 17

    def describe(self) -> dict:
        return {"mode": self.backend.value, "precision": self.bits, "tol": str(self.tol)}


def as_ratio(x: Any) -> tuple[int, int]:
    """Exact ``(numerator, denominator)`` of any backend value."""
    if isinstance(x, Fraction):
        return x.numerator, x.denominator
    if isinstance(x, int):
        return x, 1
    if isinstance(x, _MPQ):
        return int(x.numerator), int(x.denominator)
    if isinstance(x, _MPFR):
        if not gmpy2.is_finite(x):
            raise ValueError("non-finite bigfloat")
        n, d = x.as_integer_ratio()
        return int(n), int(d)
    n, d = float(x).as_integer_ratio()
    return n, d


def _policy_for(x: Any) -> PrecisionPolicy:
    b = backend_of(x)
    if b is Backend.BIGFLOAT:
        return PrecisionPolicy.bigfloat(max(64, gmpy2.get_context().precision))
    return PrecisionPolicy(b)


def mean(values: Sequence, policy: PrecisionPolicy | None = None):
    """Arithmetic mean, summed exactly and rounded once.

    Raises ``ValueError("empty mean")`` for an empty sequence.
    """
    values = list(values)
    if not values:
        raise ValueError("empty mean")
    kinds = {backend_of(v) for v in values}
    if len(kinds) != 1:
        raise TypeError("mixed backends in mean")
    if policy is None:
        policy = _policy_for(values[0])
    total = sum(Fraction(*as_ratio(v)) for v in values)
    return policy.from_ratio(total.numerator, total.denominator * len(values))


def approx_eq(a: Any, b: Any, policy: PrecisionPolicy) -> bool:
    """``a == b`` in exact mode, ``|a - b| <= tol`` otherwise."""
    ka, kb = backend_of(a), backend_of(b)
    if ka is not kb:
        raise TypeError(f"mixed backends: {ka.value} vs {kb.value}")
    if policy.is_exact:
        return a == b
    with policy.context():
        return abs(a - b) <= policy.tol


def to_str(x: Any) -> str:
    """Round-trippable text: ``p/q`` for rationals, shortest exact text otherwise."""
    if isinstance(x, (Fraction, int)):
        return str(Fraction(x))
    if isinstance(x, _MPFR):
        return format(x, f".{max(17, int(x.precision * math.log10(2)) + 2)}g")
    return repr(float(x))


def to_decimal(x: Any, digits: int = 17) -> str:
    """Decimal rendering with ``digits`` significant digits."""
    if isinstance(x, _MPFR):
        return format(x, f".{digits}g")
    if isinstance(x, (Fraction, int)):
        if digits <= 17:
            return format(float(x), f".{digits}g")
        with gmpy2.context(gmpy2.get_context(), precision=int(digits * 3.33) + 8):
            return format(gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator)), f".{digits}g")
    return format(float(x), f".{digits}g")


def parse_scalar(text: str, policy: PrecisionPolicy):
    return policy.scalar(text)


def sum_exact(values: Iterable) -> Fraction:
    return sum((Fraction(*as_ratio(v)) for v in values), Fraction(0))
