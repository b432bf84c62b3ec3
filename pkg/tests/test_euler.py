import mpmath
import pytest
import sympy

from rilt.euler import T, EulerError, characteristic, euler_operator_solve

OP = (-3, -3, 1)   # x^2 y'' - 3 x y' - 3 y


def test_characteristic_polynomial():
    assert sympy.expand(characteristic(OP) - (T ** 2 - 4 * T - 3)) == 0


def test_transform_is_exact_rational_function():
    sol = euler_operator_solve(OP, {1: 1})
    assert sympy.simplify(sol.f - T / (T ** 2 - 4 * T - 3)) == 0
    assert len(sol.poles) == 2


def test_numeric_solution_satisfies_the_ode():
    sol = euler_operator_solve(OP, {1: 1})
    ctx = mpmath.mp.clone() if hasattr(mpmath.mp, "clone") else mpmath.MPContext()
    ctx.dps = 30
    for x in ("0.2", "0.5", "0.8"):
        assert abs(sol.residual(x, ctx)) <= 1e-6
        lx = ctx.ln(ctx.mpf(x))
        assert abs(sol.forcing_value(x, ctx) - 1 / lx ** 2) < 1e-25


def test_zero_forcing_gives_zero():
    sol = euler_operator_solve(OP, {})
    assert sol.f == 0
    assert sol(0.5) == 0


def test_unsupported_cases():
    with pytest.raises(EulerError):
        euler_operator_solve((1, 0, 1), {0: 1})        # t^2 + 1: complex roots
    with pytest.raises(EulerError):
        euler_operator_solve((1, -1, 1), {0: 1})       # (t - 1)^2
    with pytest.raises(EulerError):
        euler_operator_solve((0, 0), {0: 1})
    with pytest.raises(EulerError):
        euler_operator_solve(OP, {1: 1})(1.5)
