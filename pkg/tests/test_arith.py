import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reebcz.arith import (
    AmbiguousFloor,
    Ordering,
    compare_certified,
    const,
    decimal,
    div,
    floor_certified,
    frac_certified,
    mul,
    parse,
    refine,
    sqrt,
    sub,
    to_text,
)
from oracles import mp_value, random_expr

# 1 - 1/sqrt2, 29(sqrt2 - 1) mod 1: 128-bit mpmath values
ONE_MINUS_INV_SQRT2 = "0.292893218813452475599155637895"
FRAC_29_PELL = "0.012193308819756415249"


def contains(enc, value, slack=0):
    lo, hi = enc
    value = mpmath.mpf(value)
    return mpmath.mpf(lo.numerator) / lo.denominator - slack <= value <= mpmath.mpf(hi.numerator) / hi.denominator + slack


def test_sqrt2_enclosure_width():
    x = refine(sqrt(2), 8)
    lo, hi = x.lo, x.hi
    assert hi - lo <= Fraction(1, 256) * 2
    assert lo <= Fraction(141421356, 10**8) <= hi


def test_rational_is_exact():
    x = refine(div(3, 7), 100)
    assert x.lo == x.hi == Fraction(3, 7)


def test_one_minus_inverse_sqrt2_at_50_bits():
    x = refine(sub(1, div(1, sqrt(2))), 50)
    lo, hi = x.lo, x.hi
    assert hi - lo <= Fraction(1, 2**50)
    with mpmath.workprec(128):
        assert contains((lo, hi), ONE_MINUS_INV_SQRT2, mpmath.mpf(10) ** -29)


def test_refine_rejects_lower_precision():
    x = refine(sqrt(3), 40)
    with pytest.raises(ValueError):
        x.refine(20)
    assert x.refine(40) is x


@pytest.mark.parametrize(
    "expr, expected",
    [(mul(2, sqrt(2)), 2), (const(5), 5), (mul(12, sub(sqrt(2), 1)), 4), (mul(sqrt(2), sqrt(2)), 2), (const(Fraction(-7, 2)), -4)],
)
def test_floor_certified(expr, expected):
    assert floor_certified(expr, 64) == expected


def test_frac_examples():
    assert frac_certified(const(Fraction(7, 2))).exact() == Fraction(1, 2)
    f = frac_certified(sqrt(2))
    assert abs(float(f) - 0.41421356237) < 1e-10
    f = frac_certified(mul(29, sub(sqrt(2), 1)))
    with mpmath.workprec(128):
        assert contains(f.enclosure(60), FRAC_29_PELL, mpmath.mpf(10) ** -20)


def test_ambiguous_floor_on_opaque_integer():
    x = decimal("2.0", 30)
    with pytest.raises(AmbiguousFloor) as info:
        floor_certified(x, 64, {"where": "test"})
    assert info.value.budget == 64
    assert "where=test" in str(info.value)


def test_compare_examples():
    assert compare_certified(div(1, sqrt(2) + 2), div(2 - sqrt(2), 2)) is Ordering.EQUAL
    assert compare_certified(sqrt(2), Fraction(3, 2)) is Ordering.LESS
    assert compare_certified(sqrt(2) + sqrt(3), decimal("3.14159", 4), 64) is Ordering.UNDECIDABLE
    assert compare_certified(sqrt(6), mul(sqrt(2), sqrt(3))) is Ordering.EQUAL
    assert compare_certified(div(1, sqrt(3) - sqrt(2)), sqrt(3) + sqrt(2)) is Ordering.EQUAL


def test_compare_nested_conjugate():
    # (1 + sqrt2 + sqrt3)^-1 rationalizes through two conjugations
    x = div(1, 1 + sqrt(2) + sqrt(3))
    y = div(2 + sqrt(2) - sqrt(6), 4)
    assert compare_certified(x, y) is Ordering.EQUAL


@pytest.mark.parametrize(
    "text",
    ["(+ 1 (sqrt 2))", "(/ 3 7)", 'dec"0.70710678" bits=27', "(- (* 3 (sqrt 5)) (/ 1 2))", "(- (sqrt 2))", "-4"],
)
def test_text_round_trip(text):
    x = parse(text)
    assert to_text(parse(to_text(x))) == to_text(x)
    assert parse(to_text(x)).enclosure(40) == x.enclosure(40)


def test_parse_folds_n_ary():
    assert to_text(parse("(+ 1 2 3)")) == "6"
    assert to_text(parse("(- 5)")) == "-5"


@pytest.mark.parametrize("bad", ["(+ 1", "(foo 1 2)", "(sqrt 1 2)", "", "1 2", "(sqrt -2)"])
def test_parse_errors(bad):
    with pytest.raises(ValueError):
        parse(bad)


def test_random_trees_sound_and_nested():
    rng = random.Random(7)
    for _ in range(300):
        x = random_expr(rng, 4)
        with mpmath.workprec(400):
            truth = mp_value(to_text(x))
            prev = None
            for b in (8, 16, 40, 90, 200):
                enc = x.enclosure(b)
                assert contains(enc, truth)
                if prev is not None:
                    assert prev[0] <= enc[0] and enc[1] <= prev[1]
                prev = enc


@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=500))
def test_floor_matches_rational_floor(q):
    import math

    assert floor_certified(const(q)) == math.floor(q)


@given(st.integers(1, 200), st.integers(1, 200))
def test_compare_antisymmetric(a, b):
    x, y = sqrt(a), div(b, 7)
    o1, o2 = compare_certified(x, y), compare_certified(y, x)
    assert o1.flipped() is o2
