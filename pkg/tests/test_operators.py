from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from rilt import series as S
from rilt.oracle import caputo_quadrature
from rilt.operators import (ConstantOrder, GateError, VariableOrder, caputo_apply,
                            caputo_standard, rilt_kernel_apply, volterra_apply)
from rilt.scalars import make_backend
from rilt.series import Series

from conftest import rational_series, small_fracs

ORD = st.sampled_from([ConstantOrder(Fraction(1)), ConstantOrder(Fraction(2))])


@given(rational_series(cap=6), rational_series(cap=6), small_fracs, ORD)
def test_operators_are_linear(a, b, k, order):
    for op in (caputo_apply, rilt_kernel_apply):
        assert op(a + b, order) == op(a, order) + op(b, order)
        assert op(a * k, order) == op(a, order) * k


@given(rational_series(cap=6), ORD)
def test_kernel_inverts_caputo_on_surviving_terms(u, order):
    alpha = order.value
    kept = u.like({key: c for key, c in u.terms.items() if key[0] >= alpha})
    std = S.shift(caputo_apply(kept, order), alpha)
    assert std == caputo_standard(kept, order)
    assert rilt_kernel_apply(std, order) == kept


@given(rational_series(cap=6), ORD)
def test_power_bookkeeping(u, order):
    alpha = order.value
    out = rilt_kernel_apply(u, order)
    assert {p for p, _ in out.terms} <= {p for p, _ in u.terms}
    d = caputo_apply(u, order)
    assert {p for p, _ in d.terms} <= {p - alpha for p, _ in u.terms if p >= alpha}


def test_gate_keeps_boundary_term():
    # kernel 1/t applied to x at order 1 keeps the x term
    out = rilt_kernel_apply(Series({(1, 0): 1, (0, 0): 5}, 4), ConstantOrder(Fraction(1)))
    assert out == Series({(1, 0): 1}, 4)


def test_ic_count_checked():
    with pytest.raises(ValueError):
        rilt_kernel_apply(Series({(2, 0): 1}), ConstantOrder(Fraction(3, 2)), ic_count=1)


def test_caputo_power_rule_float():
    be = make_backend("float", 40)
    u = Series({(Fraction(5, 2), 0): 1}, 8, backend=be)
    d = caputo_apply(u, ConstantOrder(Fraction(1, 2)))
    ctx = be.ctx
    want = ctx.gamma(ctx.mpf(3.5)) / ctx.gamma(3)
    assert abs(d.coefficient(2).constant_value() - want) < 1e-35


def test_caputo_matches_quadrature_with_logs():
    be = make_backend("float", 40)
    ctx = be.ctx
    u = Series({(Fraction(3), 1): 1, (Fraction(5, 2), 0): 2}, 24, backend=be)
    for alpha in (Fraction(1, 2), Fraction(3, 2)):
        d = caputo_apply(u, ConstantOrder(alpha))
        x = Fraction(1, 2)
        got = S.evaluate(d, ctx.mpf(0.5))
        ref = caputo_quadrature("x**3*log(x) + 2*x**(5/2)", alpha, x, precision=40)
        assert abs(got - ref) <= 1e-8


def test_variable_order_with_constant_series_matches_constant_path():
    be = make_backend("float", 30)
    u = Series({(Fraction(2), 0): 1, (Fraction(3), 1): 3}, 6, backend=be)
    vo = VariableOrder(Series({(0, 0): Fraction(1, 2)}, 6, backend=be))
    co = ConstantOrder(Fraction(1, 2))
    assert rilt_kernel_apply(u, vo) == rilt_kernel_apply(u, co)
    assert caputo_standard(u, vo) == caputo_standard(u, co)


def test_variable_order_kernel_inverts_forward_map():
    be = make_backend("float", 40)
    x = Series({(1, 0): 1}, 6, backend=be)
    alpha = 1 - S.expand_function("exp", -x) * Fraction(1, 2)
    order = VariableOrder(alpha)
    u = Series({(Fraction(3), 0): 1}, 6, backend=be)
    back = rilt_kernel_apply(caputo_standard(u, order), order)
    assert (back - u).magnitude() < mpmath.mpf(10) ** -30


def test_variable_order_band_is_rejected():
    be = make_backend("float", 30)
    x = Series({(1, 0): 1}, 6, backend=be)
    order = VariableOrder(1 - S.expand_function("exp", -x) * Fraction(1, 2))
    with pytest.raises(GateError):
        rilt_kernel_apply(Series({(Fraction(3, 4), 0): 1}, 6, backend=be), order)


@given(st.lists(st.tuples(st.integers(0, 5), st.fractions(min_value=Fraction(1, 10),
                                                           max_value=5)), max_size=4),
       st.sampled_from([Fraction(1, 2), Fraction(1, 3)]))
def test_volterra_keeps_positive_coefficients(terms, mu):
    be = make_backend("float", 20)
    f = Series({(p, 0): c for p, c in terms}, 8, backend=be)
    out = volterra_apply(f, mu)
    assert all(c.constant_value() > 0 for c in out.terms.values())


def test_volterra_against_quadrature():
    be = make_backend("float", 30)
    ctx = be.ctx
    f = Series({(Fraction(2), 1): 1}, 8, backend=be)
    out = volterra_apply(f, Fraction(1, 2))
    x = ctx.mpf("0.7")
    ref = ctx.quad(lambda z: z ** 2 * ctx.ln(z) / ctx.sqrt(x - z), [0, x])
    assert abs(S.evaluate(out, x) - ref) < 1e-20
