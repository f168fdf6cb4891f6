from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hklab.numerics import (
    Backend,
    PrecisionPolicy,
    approx_eq,
    as_ratio,
    backend_of,
    mean,
    to_decimal,
    to_str,
)

EXACT = PrecisionPolicy.exact()
F64 = PrecisionPolicy.f64()


def test_default_tolerances():
    assert EXACT.tol == 0
    assert F64.tol == 1e-12
    big = PrecisionPolicy.bigfloat(256)
    assert big.tol == Fraction(1, 2**128)


def test_tolerance_zero_iff_exact():
    with pytest.raises(ValueError):
        PrecisionPolicy(Backend.EXACT, tol=Fraction(1, 10))
    with pytest.raises(ValueError):
        PrecisionPolicy(Backend.F64, tol=0.0)
    with pytest.raises(ValueError):
        PrecisionPolicy.bigfloat(32)


def test_mean_exact_small():
    assert mean([Fraction(1), Fraction(2), Fraction(4)]) == Fraction(7, 3)


def test_mean_empty():
    with pytest.raises(ValueError, match="empty mean"):
        mean([])


def test_mean_mixed_backends():
    with pytest.raises(TypeError):
        mean([Fraction(1), 2.0])


def test_mean_f64_correctly_rounded():
    # the naive left-to-right float sum loses the small terms
    vals = [1e16, 1.0, 1.0, -1e16]
    assert mean(vals) == 0.5


def test_mean_bigfloat_precision():
    pol = PrecisionPolicy.bigfloat(128)
    with pol.context():
        vals = [pol.scalar(1), pol.scalar(2), pol.scalar(2)]
        m = mean(vals, pol)
    assert backend_of(m) is Backend.BIGFLOAT
    assert m.precision == 128
    assert Fraction(*as_ratio(m)) - Fraction(5, 3) < Fraction(1, 2**126)


def test_approx_eq_mixed_backends():
    with pytest.raises(TypeError):
        approx_eq(Fraction(1, 2), 0.5, EXACT)


def test_approx_eq_modes():
    assert approx_eq(Fraction(1, 3), Fraction(2, 6), EXACT)
    assert not approx_eq(Fraction(1, 3), Fraction(1, 3) + Fraction(1, 10**40), EXACT)
    assert approx_eq(0.1 + 0.2, 0.3, F64)


def test_scalar_strings():
    assert EXACT.scalar("0.01") == Fraction(1, 100)
    assert EXACT.scalar("4613/1728") == Fraction(4613, 1728)
    assert F64.scalar("1/4") == 0.25
    big = PrecisionPolicy.bigfloat(512)
    x = big.scalar("1/3")
    assert x.precision == 512


def test_to_str_roundtrip():
    assert to_str(Fraction(7483, 1728)) == "7483/1728"
    assert float(to_str(0.1)) == 0.1
    pol = PrecisionPolicy.bigfloat(200)
    with pol.context():
        x = pol.scalar("1/7")
        assert pol.scalar(to_str(x)) == x


def test_to_decimal_digits():
    assert to_decimal(Fraction(1, 3), 5) == "0.33333"
    assert len(to_decimal(Fraction(1, 3), 40).replace("0.", "", 1)) == 40


@given(st.lists(st.fractions(min_value=-100, max_value=100), min_size=1, max_size=30))
def test_mean_exact_property(vals):
    assert mean(vals) == sum(vals, Fraction(0)) / len(vals)


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=30))
def test_mean_f64_is_rounded_exact_mean(vals):
    exact = sum((Fraction(v) for v in vals), Fraction(0)) / len(vals)
    assert mean(vals) == float(exact)


@given(st.fractions(min_value=-10, max_value=10), st.integers(min_value=64, max_value=600))
def test_from_ratio_bigfloat_correct_rounding(q, bits):
    pol = PrecisionPolicy.bigfloat(bits)
    x = pol.from_ratio(q.numerator, q.denominator)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        assert x == gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator))
