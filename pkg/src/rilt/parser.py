"""Recursive-descent parser for right-hand side expressions.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := base ('^' ['-'] INT)?
    base   := NUMBER | 'x' | 'pi' | IDENT | call | '(' expr ')'
    call   := D(e[, order]) | delay(u; lam, b) | volterra(mu=e; e)
            | fredholm(param=c; basis=e[; weight=e]) | xpow(e)
            | sin|cos|exp|ln1p|gamma|rgamma|ln (e) | u(e)
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import (FUNCTIONS, Add, Caputo, Compose, Delay, Div, Fredholm, Func, IntPow,
                   Mul, NamedConst, Neg, Node, Num, ODeriv, Param, Unknown, Volterra, X,
                   XPow)

MAX_DEPTH = 64


@dataclass(frozen=True)
class ParseDiagnostic:
    span: tuple[int, int]
    message: str
    expected: frozenset = field(default_factory=frozenset)

    def render(self, text: str) -> str:
        start, end = self.span
        exp = f" (expected {', '.join(sorted(self.expected))})" if self.expected else ""
        return f"{start}:{end}: {self.message}{exp}\n  {text}\n  {' ' * start}{'^' * max(1, end - start)}"


class ParseError(ValueError):
    def __init__(self, diagnostics: list[ParseDiagnostic], text: str = ""):
        self.diagnostics = list(diagnostics)
        self.text = text
        super().__init__("; ".join(f"{d.span[0]}:{d.span[1]}: {d.message}" for d in self.diagnostics))


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),;=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError([ParseDiagnostic((pos, pos + 1), f"unexpected character {text[pos]!r}")], text)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), pos, m.end()))
        pos = m.end()
    out.append(Token("eof", "", len(text), len(text)))
    return out


class _Parser:
    def __init__(self, text: str, params=(), unknowns=None):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.params = set(params)
        self.unknowns = None if unknowns is None else set(unknowns)
        self.depth = 0

    # -- helpers ---------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, message, expected=(), tok: Token | None = None):
        tok = tok or self.tok
        end = max(tok.end, tok.start + 1) if tok.kind != "eof" else tok.start
        start = min(tok.start, len(self.text))
        end = min(max(end, start), len(self.text))
        raise ParseError([ParseDiagnostic((start, end), message, frozenset(expected))], self.text)

    def accept(self, text) -> Token | None:
        if self.tok.kind in ("op", "ident") and self.tok.text == text:
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text) -> Token:
        t = self.accept(text)
        if t is None:
            got = self.tok.text or "end of input"
            self.fail(f"expected {text!r}, found {got!r}", {text})
        return t

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail(f"expression nested deeper than {MAX_DEPTH}")

    def leave(self):
        self.depth -= 1

    # -- grammar ---------------------------------------------------------------
    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.tok.text!r}", {"+", "-", "*", "/", "^", "end of input"})
        return node

    def expr(self) -> Node:
        self.enter()
        terms = [self.term()]
        while True:
            if self.accept("+"):
                terms.append(self.term())
            elif self.accept("-"):
                terms.append(_neg(self.term()))
            else:
                break
        self.leave()
        return terms[0] if len(terms) == 1 else Add(tuple(terms))

    def term(self) -> Node:
        factors = [self.unary()]
        while True:
            if self.accept("*"):
                factors.append(self.unary())
            elif self.accept("/"):
                den = self.unary()
                num = factors[0] if len(factors) == 1 else Mul(tuple(factors))
                factors = [_div(num, den)]
            else:
                break
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def unary(self) -> Node:
        if self.accept("-"):
            self.enter()
            node = _neg(self.unary())
            self.leave()
            return node
        return self.power()

    def power(self) -> Node:
        base = self.base()
        if self.accept("^"):
            neg = bool(self.accept("-"))
            paren = bool(self.accept("("))
            if not neg and paren:
                neg = bool(self.accept("-"))
            t = self.tok
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
                self.fail("exponent must be an integer literal (use xpow for other powers)", {"INT"})
            self.i += 1
            if paren:
                self.expect(")")
            e = int(t.text)
            return IntPow(base, -e if neg else e)
        return base

    def base(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(Fraction(t.text))
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "ident":
            self.i += 1
            name = t.text
            if self.tok.text == "(" and self.tok.kind == "op":
                return self.call(t)
            if name == "x":
                return X()
            if name == "pi":
                return NamedConst("pi")
            if name in self.params:
                return Param(name)
            if name in FUNCTIONS or name in ("D", "delay", "volterra", "fredholm", "xpow"):
                self.fail(f"{name} needs an argument list", {"("})
            if self.unknowns is not None and name not in self.unknowns:
                self.fail(f"undeclared identifier {name!r}", tok=t)
            return Unknown(name)
        got = t.text or "end of input"
        self.fail(f"expected an operand, found {got!r}", {"number", "identifier", "("})

    def _kw(self, word):
        t = self.tok
        if t.kind == "ident" and t.text == word:
            self.i += 1
            self.expect("=")
            return
        self.fail(f"expected '{word}='", {f"{word}="})

    def _ident(self, what) -> Token:
        t = self.tok
        if t.kind != "ident":
            self.fail(f"expected {what}", {what})
        self.i += 1
        return t

    def call(self, head: Token) -> Node:
        name = head.text
        self.expect("(")
        self.enter()
        if name == "D":
            arg = self.expr()
            if self.accept(","):
                ot = self.tok
                order = self.expr()
                if isinstance(order, Num) and order.value.denominator == 1:
                    if order.value < 0:
                        self.fail("derivative order must be nonnegative", tok=ot)
                    node = ODeriv(arg, int(order.value))
                else:
                    node = Caputo(arg, order)
            else:
                node = ODeriv(arg, 1)
        elif name == "delay":
            u = self._ident("unknown name")
            self._check_unknown(u)
            self.expect(";")
            lam = self.expr()
            self.expect(",")
            shift = self.expr()
            node = Delay(u.text, lam, shift)
        elif name == "volterra":
            self._kw("mu")
            mu = self.expr()
            self.expect(";")
            node = Volterra(mu, self.expr())
        elif name == "fredholm":
            self._kw("param")
            p = self._ident("parameter name")
            if p.text not in self.params:
                self.fail(f"{p.text!r} is not a declared parameter", tok=p)
            self.expect(";")
            self._kw("basis")
            basis = self.expr()
            weight = None
            if self.accept(";"):
                self._kw("weight")
                weight = self.expr()
            node = Fredholm(p.text, basis, weight)
        elif name == "xpow":
            arg = self.expr()
            node = XPow(arg.arg, -1) if isinstance(arg, Neg) else XPow(arg, 1)
        elif name in FUNCTIONS:
            node = Func(name, self.expr())
        elif name in ("x", "pi") or name in self.params:
            self.fail(f"{name!r} cannot be called", tok=head)
        else:
            self._check_unknown(head)
            arg = self.expr()
            node = Unknown(name) if isinstance(arg, X) else Compose(name, arg)
        self.expect(")")
        self.leave()
        return node

    def _check_unknown(self, t: Token):
        if self.unknowns is not None and t.text not in self.unknowns:
            self.fail(f"undeclared unknown {t.text!r}", tok=t)


def _neg(node: Node) -> Node:
    if isinstance(node, Num):
        return Num(-node.value)
    return Neg(node)


def _div(num: Node, den: Node) -> Node:
    if isinstance(num, Num) and isinstance(den, Num) and den.value != 0:
        return Num(num.value / den.value)
    return Div(num, den)


def parse_expression(text: str, params=(), unknowns=None) -> Node:
    """Parse ``text``; identifiers in ``params`` become parameters, others unknowns."""
    return _Parser(text, params, unknowns).parse()
