from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from rilt import series as S
from rilt.scalars import make_backend
from rilt.series import LogCapError, Series, SeriesError

from conftest import rational_series

HALF = rational_series(cap=8, max_power=4)


@given(HALF, HALF, HALF)
def test_ring_laws(a, b, c):
    assert a * b == b * a
    assert a * (b + c) == a * b + a * c
    assert (a + b) + c == a + (b + c)
    assert a - a == S.zero_like(a)


@given(rational_series(cap=8, max_power=4, logs=False, lattice=(1,)),
       rational_series(cap=8, max_power=4, logs=False, lattice=(1,)),
       st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]))
def test_evaluation_is_multiplicative(a, b, x):
    assert S.evaluate(a * b, x) == S.evaluate(a, x) * S.evaluate(b, x)


@given(rational_series(cap=6))
def test_diff_undoes_antideriv(a):
    assert S.diff(S.antideriv(a)) == a


@given(rational_series(cap=6, logs=False), st.sampled_from([Fraction(1, 64), Fraction(729, 64), 64]))
def test_affine_scaling_inverse(a, lam):
    assert S.substitute_affine(a, 1, 0) == a
    back = S.substitute_affine(S.substitute_affine(a, lam, 0), 1 / Fraction(lam), 0)
    assert back == a


def test_affine_scaling_with_logs_float():
    be = make_backend("float", 40)
    a = Series({(Fraction(3, 2), 2): 1, (Fraction(1), 1): -3}, 6, backend=be)
    back = S.substitute_affine(S.substitute_affine(a, Fraction(1, 3)), 3)
    assert (back - a).magnitude() < mpmath.mpf(10) ** -35


def test_shifted_argument_needs_polynomial():
    a = Series({(2, 0): 1}, 6)
    assert S.substitute_affine(a, 1, 1) == Series({(0, 0): 1, (1, 0): 2, (2, 0): 1}, 6)
    with pytest.raises(SeriesError):
        S.substitute_affine(Series({(Fraction(1, 2), 0): 1}, 6), 1, 1)


@given(rational_series(cap=6))
def test_serialize_round_trip(a):
    assert S.parse_series(S.serialize(a)) == a


def test_serialize_edge_cases():
    empty = Series({}, 4)
    assert S.parse_series(S.serialize(empty)) == empty
    third = Series({(Fraction(8, 3), 0): 5}, 4)
    back = S.parse_series(S.serialize(third))
    assert back == third and back.power_cap == 4
    with pytest.raises(SeriesError):
        S.parse_series("{not json")
    with pytest.raises(SeriesError):
        S.parse_series('{"terms": [{"p": "1", "l": 0, "c": "1"}, {"p": "1", "l": 0, "c": "2"}]}')


def test_constructor_rejects_bad_terms():
    with pytest.raises(SeriesError):
        Series({(-1, 0): 1})
    with pytest.raises(LogCapError):
        Series({(1, 3): 1}, power_cap=2)
    assert Series({(9, 0): 1}, power_cap=8) == Series({}, 8)


def test_log_cap_overflow_in_product():
    a = Series({(1, 1): 1}, power_cap=4, log_cap=1)
    with pytest.raises(LogCapError):
        a * a


def test_point_evaluation():
    assert S.evaluate(Series({(3, 0): 1}), Fraction(1, 2)) == Fraction(1, 8)
    assert S.evaluate(Series({(0, 0): 2, (1, 1): 1}), 0) == 2
    with pytest.raises(SeriesError):
        S.evaluate(Series({(0, 1): 1}), 0)
    with pytest.raises(SeriesError):
        S.evaluate(Series({(1, 0): 1}), -1)


def test_first_iterate_with_logs_at_c_one():
    be = make_backend("float", 30)
    y1 = Series({(0, 0): 1, (1, 1): 1}, 4, backend=be)
    for x in ("0.1", "0.5", "0.9"):
        xv = be.ctx.mpf(x)
        assert abs(S.evaluate(y1, xv) - (1 + xv * be.ctx.ln(xv))) < 1e-28


def test_expand_sin_and_exp():
    x = Series({(1, 0): 1}, 7)
    assert S.expand_function("sin", x) == Series(
        {(1, 0): 1, (3, 0): Fraction(-1, 6), (5, 0): Fraction(1, 120), (7, 0): Fraction(-1, 5040)}, 7)
    with pytest.raises(SeriesError):
        S.expand_function("exp", S.one_like(x))


def test_exp_of_x_log_x_matches_x_to_the_x():
    be = make_backend("float", 30)
    arg = Series({(1, 1): 1}, 30, backend=be)
    s = S.expand_function("exp", arg)
    x = be.ctx.mpf("0.5")
    assert abs(S.evaluate(s, x) - x ** x) < 1e-20


def test_variable_exponent_expansions():
    be = make_backend("float", 40)
    ctx = be.ctx
    assert S.expand_variable_exponent(Series({(0, 0): Fraction(1, 2)}, 6)) == Series(
        {(Fraction(1, 2), 0): 1}, 6)
    x = Series({(1, 0): 1}, 40, backend=be)
    sinx = S.expand_function("sin", x)
    xs = S.expand_variable_exponent(sinx)
    h = ctx.mpf("0.5")
    assert abs(S.evaluate(xs, h) - h ** ctx.sin(h)) < 1e-12
    alpha = 1 - S.expand_function("exp", -x) * Fraction(1, 2)
    xa = S.expand_variable_exponent(alpha)
    assert abs(S.evaluate(xa, h) - h ** (1 - ctx.exp(-h) / 2)) < 1e-12
