"""Expression trees for right-hand sides, orders and reference solutions."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class Node:
    __slots__ = ()

    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Num(Node):
    value: Fraction


@dataclass(frozen=True)
class NamedConst(Node):
    name: str  # only "pi"


@dataclass(frozen=True)
class Param(Node):
    name: str


@dataclass(frozen=True)
class X(Node):
    pass


@dataclass(frozen=True)
class Unknown(Node):
    name: str


@dataclass(frozen=True)
class Add(Node):
    terms: tuple

    def children(self):
        return self.terms


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Mul(Node):
    factors: tuple

    def children(self):
        return self.factors


@dataclass(frozen=True)
class Div(Node):
    num: Node
    den: Node

    def children(self):
        return (self.num, self.den)


@dataclass(frozen=True)
class IntPow(Node):
    base: Node
    exp: int

    def children(self):
        return (self.base,)


FUNCTIONS = ("sin", "cos", "exp", "ln1p", "gamma", "rgamma", "ln")


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class XPow(Node):
    """``x ** (sign * beta)``."""
    beta: Node
    sign: int = 1

    def children(self):
        return (self.beta,)


@dataclass(frozen=True)
class Caputo(Node):
    arg: Node
    order: Node

    def children(self):
        return (self.arg, self.order)


@dataclass(frozen=True)
class ODeriv(Node):
    arg: Node
    n: int

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Delay(Node):
    """``name(lam * x + shift)``."""
    name: str
    lam: Node
    shift: Node

    def children(self):
        return (self.lam, self.shift)


@dataclass(frozen=True)
class Volterra(Node):
    """``int_0^x arg(z) (x - z)^(-mu) dz``."""
    mu: Node
    arg: Node

    def children(self):
        return (self.mu, self.arg)


@dataclass(frozen=True)
class Fredholm(Node):
    """Ansatz ``param * basis`` for a fixed-limit integral.

    ``weight`` (optional) is the integrand ``g`` of the original term
    ``basis(x) * int_0^1 g(z) dz``; it yields the consistency condition
    ``param = int_0^1 g``.
    """
    param: str
    basis: Node
    weight: Node | None = None

    def children(self):
        return (self.basis,) if self.weight is None else (self.basis, self.weight)


@dataclass(frozen=True)
class Compose(Node):
    """``name(arg)`` for a general inner expression."""
    name: str
    arg: Node

    def children(self):
        return (self.arg,)


def walk(node: Node):
    yield node
    for ch in node.children():
        yield from walk(ch)


def unknowns_in(node: Node) -> set[str]:
    out = set()
    for n in walk(node):
        if isinstance(n, (Unknown, Delay, Compose)):
            out.add(n.name)
    return out


def params_in(node: Node) -> set[str]:
    out = set()
    for n in walk(node):
        if isinstance(n, Param):
            out.add(n.name)
        elif isinstance(n, Fredholm):
            out.add(n.param)
    return out


def depth(node: Node) -> int:
    kids = node.children()
    return 1 + (max(depth(k) for k in kids) if kids else 0)


def substitute_params(node: Node, values: dict) -> Node:
    """Replace bound parameters by numeric literals."""
    if isinstance(node, Param):
        return Num(values[node.name]) if node.name in values else node
    if isinstance(node, (Num, NamedConst, X, Unknown)):
        return node
    if isinstance(node, Add):
        return Add(tuple(substitute_params(t, values) for t in node.terms))
    if isinstance(node, Mul):
        return Mul(tuple(substitute_params(t, values) for t in node.factors))
    if isinstance(node, Neg):
        return Neg(substitute_params(node.arg, values))
    if isinstance(node, Div):
        return Div(substitute_params(node.num, values), substitute_params(node.den, values))
    if isinstance(node, IntPow):
        return IntPow(substitute_params(node.base, values), node.exp)
    if isinstance(node, Func):
        return Func(node.name, substitute_params(node.arg, values))
    if isinstance(node, XPow):
        return XPow(substitute_params(node.beta, values), node.sign)
    if isinstance(node, Caputo):
        return Caputo(substitute_params(node.arg, values), substitute_params(node.order, values))
    if isinstance(node, ODeriv):
        return ODeriv(substitute_params(node.arg, values), node.n)
    if isinstance(node, Delay):
        return Delay(node.name, substitute_params(node.lam, values),
                     substitute_params(node.shift, values))
    if isinstance(node, Volterra):
        return Volterra(substitute_params(node.mu, values), substitute_params(node.arg, values))
    if isinstance(node, Fredholm):
        if node.param in values:
            raise ValueError(f"Fredholm constant {node.param!r} cannot be bound up front")
        w = None if node.weight is None else substitute_params(node.weight, values)
        return Fredholm(node.param, substitute_params(node.basis, values), w)
    if isinstance(node, Compose):
        return Compose(node.name, substitute_params(node.arg, values))
    raise TypeError(f"unknown node {node!r}")


# -- printing ----------------------------------------------------------------------

def _num_text(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def to_source(node: Node) -> str:
    """Fully parenthesised source text that parses back to ``node``."""
    if isinstance(node, Num):
        v = node.value
        if v < 0:
            return f"(-{_num_text(-v)})"
        return _num_text(v) if v.denominator == 1 else f"({_num_text(v)})"
    if isinstance(node, NamedConst):
        return node.name
    if isinstance(node, Param):
        return node.name
    if isinstance(node, X):
        return "x"
    if isinstance(node, Unknown):
        return node.name
    if isinstance(node, Add):
        return "(" + " + ".join(to_source(t) for t in node.terms) + ")"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, Mul):
        return "(" + " * ".join(to_source(t) for t in node.factors) + ")"
    if isinstance(node, Div):
        return f"({to_source(node.num)} / {to_source(node.den)})"
    if isinstance(node, IntPow):
        return f"({to_source(node.base)}^{node.exp})"
    if isinstance(node, Func):
        return f"{node.name}({to_source(node.arg)})"
    if isinstance(node, XPow):
        inner = to_source(node.beta)
        return f"xpow({inner})" if node.sign > 0 else f"xpow((-{inner}))"
    if isinstance(node, Caputo):
        return f"D({to_source(node.arg)}, {to_source(node.order)})"
    if isinstance(node, ODeriv):
        return f"D({to_source(node.arg)}, {node.n})"
    if isinstance(node, Delay):
        return f"delay({node.name}; {to_source(node.lam)}, {to_source(node.shift)})"
    if isinstance(node, Volterra):
        return f"volterra(mu={to_source(node.mu)}; {to_source(node.arg)})"
    if isinstance(node, Fredholm):
        w = "" if node.weight is None else f"; weight={to_source(node.weight)}"
        return f"fredholm(param={node.param}; basis={to_source(node.basis)}{w})"
    if isinstance(node, Compose):
        return f"{node.name}({to_source(node.arg)})"
    raise TypeError(f"unknown node {node!r}")


def replace_x(node: Node, new: Node) -> Node:
    """Substitute every occurrence of ``x`` (outside unknown arguments) by ``new``."""
    if isinstance(node, X):
        return new
    if isinstance(node, (Num, NamedConst, Param, Unknown)):
        return node
    if isinstance(node, Add):
        return Add(tuple(replace_x(t, new) for t in node.terms))
    if isinstance(node, Mul):
        return Mul(tuple(replace_x(t, new) for t in node.factors))
    if isinstance(node, Neg):
        return Neg(replace_x(node.arg, new))
    if isinstance(node, Div):
        return Div(replace_x(node.num, new), replace_x(node.den, new))
    if isinstance(node, IntPow):
        return IntPow(replace_x(node.base, new), node.exp)
    if isinstance(node, Func):
        return Func(node.name, replace_x(node.arg, new))
    raise ValueError(f"cannot re-centre {type(node).__name__} nodes")
