import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from rilt.oracle import (OracleError, caputo_quadrature, exact_registry, oracle_from_problem,
                         rk4_integrate, score)
from rilt.problem import load_bundled


def test_registered_solutions_pass_self_check():
    reg = exact_registry(check=True)
    assert "riccati" in reg and "nonlinear_delay" in reg


def test_rk4_is_deterministic_and_accurate():
    op = oracle_from_problem(load_bundled("rotation"), precision=30)
    a = rk4_integrate(op, Fraction(1, 100), 1)
    b = rk4_integrate(op, Fraction(1, 100), 1)
    assert a.states == b.states and a.times == b.times
    x, y = a.states[-1]
    assert abs(x - mpmath.cos(1)) < 1e-9 and abs(y - mpmath.sin(1)) < 1e-9


def test_rk4_needs_first_order_system():
    with pytest.raises(OracleError):
        oracle_from_problem(load_bundled("delay_varorder"))
    op = oracle_from_problem(load_bundled("rotation"))
    with pytest.raises(OracleError):
        rk4_integrate(op, 0, 1)


def test_caputo_quadrature_power_rule():
    got = caputo_quadrature("x**2", Fraction(1, 2), Fraction(1, 2), precision=30)
    want = mpmath.gamma(3) / mpmath.gamma(2.5) * mpmath.mpf(0.5) ** 1.5
    assert abs(got - want) < 1e-12
    with pytest.raises(OracleError):
        caputo_quadrature("x**2", 1, Fraction(1, 2))


vals = st.floats(-10, 10, allow_nan=False)


@given(st.lists(st.tuples(vals, vals), min_size=1, max_size=12), st.randoms())
def test_score_symmetry_and_permutation(pairs, rnd):
    grid = list(range(len(pairs)))
    cand = lambda i: pairs[i][0]
    ref = lambda i: pairs[i][1]
    forward = score(cand, ref, grid)
    assert forward.max_error == score(ref, cand, grid).max_error
    shuffled = list(grid)
    rnd.shuffle(shuffled)
    assert score(cand, ref, shuffled).max_error == forward.max_error


def test_score_vector_components():
    rep = score(lambda t: [1, 2], lambda t: [1.5, 2], [0, 1])
    assert rep.max_error == 0.5
    with pytest.raises(OracleError):
        score(lambda t: [1], lambda t: [1, 2], [0])


def test_score_empty_grid():
    assert score(abs, abs, []).max_error == 0


def test_self_check_catches_a_wrong_solution():
    from rilt.oracle import ExactEntry, self_check
    wrong = ExactEntry("bad", "volterra", {}, lambda ctx, x: x ** 2)
    with pytest.raises(OracleError):
        self_check(wrong, seed=random.Random(1).randint(0, 99))
