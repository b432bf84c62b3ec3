from hypothesis import given, strategies as st

import pytest

from rilt.expr import to_source
from rilt.parser import ParseError, parse_expression

UNKNOWNS = {"u", "v"}
PARAMS = ("c",)

leaves = st.sampled_from(["x", "u", "v", "c", "pi", "2", "1/3", "0.25", "u(x/2)"])


def _wrap(children):
    one = children
    two = st.tuples(children, children)
    return st.one_of(
        st.builds(lambda a, b: f"{a} + {b}", one, one),
        st.builds(lambda a, b: f"{a} - {b}", one, one),
        st.builds(lambda a, b: f"{a} * {b}", one, one),
        st.builds(lambda a: f"{a} / 3", one),
        st.builds(lambda a: f"-{a}", one),
        st.builds(lambda a, n: f"({a})^{n}", one, st.integers(0, 4)),
        st.builds(lambda f, a: f"{f}({a})", st.sampled_from(
            ["sin", "cos", "exp", "ln1p", "gamma", "rgamma", "ln"]), one),
        st.builds(lambda a: f"xpow({a})", one),
        st.builds(lambda a: f"D(u, {a})", one),
        st.builds(lambda n: f"D(v, {n})", st.integers(0, 3)),
        st.builds(lambda ab: f"delay(u; {ab[0]}, {ab[1]})", two),
        st.builds(lambda a: f"volterra(mu=1/2; {a})", one),
        st.builds(lambda ab: f"fredholm(param=c; basis={ab[0]}; weight={ab[1]})", two),
        st.builds(lambda a: f"u({a})", one),
        st.builds(lambda a: f"({a})", one),
    )


sources = st.recursive(leaves, _wrap, max_leaves=12)


@given(sources)
def test_print_parse_round_trip(src):
    ast = parse_expression(src, PARAMS, UNKNOWNS)
    printed = to_source(ast)
    assert parse_expression(printed, PARAMS, UNKNOWNS) == ast
    assert to_source(parse_expression(printed, PARAMS, UNKNOWNS)) == printed


@given(st.text(alphabet="xuc+-*/^()0123456789;,= ", max_size=30))
def test_errors_have_spans_inside_input(text):
    try:
        parse_expression(text, PARAMS, UNKNOWNS)
    except ParseError as exc:
        for d in exc.diagnostics:
            lo, hi = d.span
            assert 0 <= lo <= hi <= len(text)


def test_diagnostic_names_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse_expression("1 + * x", unknowns=UNKNOWNS)
    (d,) = info.value.diagnostics
    assert d.span == (4, 5)
    assert "number" in d.expected


@pytest.mark.parametrize("text", [
    "w + 1",              # undeclared
    "x^(1/2)",            # non-integer power
    "D(u, -1)",
    "fredholm(param=q; basis=x)",
    "c(x)",
    "sin",
    "1 +",
])
def test_rejected_inputs(text):
    with pytest.raises(ParseError):
        parse_expression(text, PARAMS, UNKNOWNS)


def test_nesting_limit():
    deep = "(" * 80 + "x" + ")" * 80
    with pytest.raises(ParseError, match="deeper"):
        parse_expression(deep)
    parse_expression("(" * 20 + "x" + ")" * 20)


def test_composition_with_bare_x_is_the_unknown():
    assert parse_expression("u(x)", unknowns=UNKNOWNS) == parse_expression("u", unknowns=UNKNOWNS)
