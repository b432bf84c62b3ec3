from fractions import Fraction

import pytest

from rilt.expr import Func, NamedConst, walk
from rilt.problem import ProblemError, bundled_problems, load_bundled, parse_problem, parse_value

GOOD = """
[problem]
name = demo

[params]
names = c
c = 1/2

[unknowns]
y.order = 1
y.ic = c

[equations]
y = D(y, 1) = 1 + y^2

[solver]
order = 6
backend = rational
"""


def _nodes(p):
    exprs = list(p.rhs.values()) + list(p.orders.values()) + list(p.natural.values())
    exprs += [e for v in p.ics.values() for e in v] + list(p.reference.values())
    exprs += [c.value for c in p.constraints]
    for e in exprs:
        yield from walk(e)


def test_every_bundled_problem_loads():
    names = bundled_problems()
    assert {"riccati", "rossler", "nonlinear_delay", "delay_varorder"} <= set(names)
    for n in names:
        p = load_bundled(n)
        assert p.name == n
        assert set(p.rhs) == set(p.unknowns)


def test_grammar_is_covered_by_bundled_problems():
    kinds, funcs = set(), set()
    for n in bundled_problems():
        for node in _nodes(load_bundled(n)):
            kinds.add(type(node).__name__)
            if isinstance(node, Func):
                funcs.add(node.name)
            if isinstance(node, NamedConst):
                kinds.add("pi")
    assert kinds >= {"Add", "Caputo", "Compose", "Delay", "Div", "Fredholm", "Func", "IntPow",
                     "Mul", "Neg", "Num", "ODeriv", "Param", "Unknown", "Volterra", "X",
                     "XPow", "pi"}
    assert funcs >= {"sin", "cos", "exp", "ln1p", "gamma", "rgamma", "ln"}


def test_parse_and_bind():
    p = parse_problem(GOOD)
    assert p.bindings == {"c": Fraction(1, 2)}
    b = p.bound()
    assert b.params == () and b.meta["bound"] == {"c": Fraction(1, 2)}
    with pytest.raises(ProblemError):
        p.with_bindings({"nope": 1})


def test_ic_count_mismatch_is_reported():
    bad = GOOD.replace("y.order = 1", "y.order = 3/2").replace("D(y, 1)", "D(y, 3/2)")
    with pytest.raises(ProblemError, match="needs 2 initial"):
        parse_problem(bad)


def test_errors_are_collected():
    bad = GOOD.replace("1 + y^2", "1 + zz").replace("order = 6", "order = -1")
    with pytest.raises(ProblemError) as info:
        parse_problem(bad)
    text = str(info.value)
    assert "zz" in text


def test_parse_value_forms():
    assert parse_value("-1/3") == Fraction(-1, 3)
    assert parse_value("0.25") == Fraction(1, 4)
    assert parse_value("1e-3") == Fraction(1, 1000)
    with pytest.raises(ValueError):
        parse_value("one")
