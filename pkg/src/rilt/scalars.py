"""Scalar backends and parameter polynomials.

Two coefficient fields are supported: exact rationals (:class:`fractions.Fraction`)
and configurable-precision binary floats (an isolated :mod:`mpmath` context per
backend, so two solves at different precisions never interfere).

:class:`ParamScalar` is a sparse polynomial in a fixed tuple of parameter names
whose coefficients live in one of those fields.  Series coefficients are always
``ParamScalar`` values; a problem without symbolic parameters simply uses the
empty name tuple.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

import mpmath
import mpmath.libmp as libmp
from mpmath.ctx_mp_python import _mpf as MPF


class BackendError(ValueError):
    """Raised when an operation cannot be carried out in the selected field."""


class ParameterError(ValueError):
    """Parameter-set mismatch, unbound parameter or degree overflow."""


class RationalBackend:
    name = "rational"
    exact = True
    precision = None
    tolerance = Fraction(0)

    def scalar(self, value):
        if isinstance(value, Fraction):
            return value
        if isinstance(value, (int, Rational)):
            return Fraction(value)
        if isinstance(value, str):
            return Fraction(value)
        if isinstance(value, MPF) or isinstance(value, float):
            raise BackendError(
                f"inexact value {value!r} cannot enter the rational backend")
        raise BackendError(f"unsupported scalar {value!r}")

    def is_integral(self, value) -> bool:
        return Fraction(value).denominator == 1

    def magnitude(self, value):
        return abs(value)

    def to_text(self, value) -> str:
        value = Fraction(value)
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"

    def to_float(self, value) -> float:
        return float(value)

    def require_float(self, what: str):
        raise BackendError(f"{what} needs the floating backend")

    def __eq__(self, other):
        return isinstance(other, RationalBackend)

    def __hash__(self):
        return hash("rational")

    def __repr__(self):
        return "RationalBackend()"


class FloatBackend:
    """Binary floating point with ``precision`` decimal digits plus guard digits."""

    name = "float"
    exact = False

    def __init__(self, precision: int = 50, guard: int = 10):
        if precision < 15:
            raise BackendError("precision below 15 digits is not supported")
        self.precision = int(precision)
        self.guard = int(guard)
        self.ctx = mpmath.MPContext()
        self.ctx.dps = self.precision + self.guard
        self.tolerance = self.ctx.mpf(10) ** (-(self.precision - 5))

    def scalar(self, value):
        ctx = self.ctx
        if isinstance(value, MPF):
            if type(value) is ctx.mpf:
                return value
            return ctx.mpf(value._mpf_)
        if isinstance(value, Fraction):
            return ctx.mpf(value.numerator) / value.denominator
        if isinstance(value, (int, float)):
            return ctx.mpf(value)
        if isinstance(value, str):
            return self.scalar(Fraction(value))
        if isinstance(value, Rational):
            return ctx.mpf(value.numerator) / value.denominator
        raise BackendError(f"unsupported scalar {value!r}")

    def is_integral(self, value) -> bool:
        return self.ctx.isint(value)

    def magnitude(self, value):
        return abs(self.scalar(value))

    def to_text(self, value) -> str:
        value = self.scalar(value)
        if value == 0:
            return "0"
        return libmp.to_str(value._mpf_, libmp.repr_dps(self.ctx.prec))

    def to_float(self, value) -> float:
        return float(value)

    def require_float(self, what: str):
        return None

    def __eq__(self, other):
        return isinstance(other, FloatBackend) and other.precision == self.precision \
            and other.guard == self.guard

    def __hash__(self):
        return hash(("float", self.precision, self.guard))

    def __repr__(self):
        return f"FloatBackend(precision={self.precision})"


Backend = RationalBackend | FloatBackend


def make_backend(kind: str = "float", precision: int = 50) -> Backend:
    if kind == "rational":
        return RationalBackend()
    if kind == "float":
        return FloatBackend(precision)
    raise BackendError(f"unknown backend {kind!r} (expected rational or float)")


def to_exponent(value, backend: Backend | None = None, max_den: int = 10**6) -> Fraction:
    """Recover an exact rational exponent from a scalar.

    Floating values must sit within the backend tolerance of a fraction with a
    modest denominator, otherwise the exponent is treated as irrational.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, MPF):
        sign, man, exp, _ = value._mpf_
        if not man and exp:
            raise BackendError(f"exponent {value} is not finite")
        guess = (Fraction((-1) ** sign * int(man)) * Fraction(2) ** exp).limit_denominator(max_den)
        ctx = value.context
        tol = backend.tolerance if isinstance(backend, FloatBackend) else ctx.mpf(10) ** -25
        if abs(value - ctx.mpf(guess.numerator) / guess.denominator) > tol:
            raise BackendError(f"exponent {value} is not rational")
        return guess
    raise BackendError(f"cannot interpret {value!r} as a rational exponent")


class ParamScalar:
    """Polynomial in declared parameters with scalar coefficients.

    ``terms`` maps exponent tuples (aligned with ``names``) to nonzero scalars.
    Instances are immutable.
    """

    __slots__ = ("names", "terms")
    degree_cap = 64

    def __init__(self, terms: Mapping[tuple, object] | None = None,
                 names: tuple[str, ...] = ()):
        self.names = tuple(names)
        width = len(self.names)
        clean = {}
        for mono, coeff in (terms or {}).items():
            if len(mono) != width:
                raise ParameterError(f"monomial {mono} does not match {self.names}")
            if coeff != 0:
                clean[tuple(mono)] = coeff
        self.terms = clean

    @classmethod
    def const(cls, value, names: tuple[str, ...] = ()) -> "ParamScalar":
        if value == 0:
            return cls({}, names)
        return cls({(0,) * len(names): value}, names)

    @classmethod
    def param(cls, name: str, names: tuple[str, ...], one=1) -> "ParamScalar":
        if name not in names:
            raise ParameterError(f"{name!r} is not a declared parameter")
        mono = tuple(1 if n == name else 0 for n in names)
        return cls({mono: one}, names)

    # -- queries -------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(m) for m in self.terms)

    def constant_value(self, zero=0):
        if not self.is_constant():
            raise ParameterError(f"{self.to_text()} depends on parameters")
        for coeff in self.terms.values():
            return coeff
        return zero

    def free_names(self) -> set[str]:
        used = set()
        for mono in self.terms:
            used.update(n for n, e in zip(self.names, mono) if e)
        return used

    def degree(self, name: str) -> int:
        idx = self.names.index(name)
        return max((m[idx] for m in self.terms), default=0)

    def magnitude(self):
        """Largest absolute coefficient (0 for the zero polynomial)."""
        best = 0
        for coeff in self.terms.values():
            a = abs(coeff)
            if a > best:
                best = a
        return best

    # -- alignment ---------------------------------------------------------
    def _align(self, other: "ParamScalar"):
        if self.names == other.names:
            return self, other
        if not other.names and other.is_constant():
            return self, ParamScalar.const(other.constant_value(), self.names)
        if not self.names and self.is_constant():
            return ParamScalar.const(self.constant_value(), other.names), other
        raise ParameterError(f"parameter sets differ: {self.names} vs {other.names}")

    def _lift(self, other):
        if isinstance(other, ParamScalar):
            return self._align(other)
        return self, ParamScalar.const(other, self.names)

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        a, b = self._lift(other)
        out = dict(a.terms)
        for mono, coeff in b.terms.items():
            s = out.get(mono)
            s = coeff if s is None else s + coeff
            if s == 0:
                out.pop(mono, None)
            else:
                out[mono] = s
        return _raw(out, a.names)

    __radd__ = __add__

    def __neg__(self):
        return _raw({m: -c for m, c in self.terms.items()}, self.names)

    def __sub__(self, other):
        return self + (-other if isinstance(other, ParamScalar) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ParamScalar):
            if other == 0:
                return _raw({}, self.names)
            return _raw({m: c * other for m, c in self.terms.items()}, self.names)
        a, b = self._align(other)
        if len(a.terms) == 1 and len(b.terms) == 1:
            (ma, ca), = a.terms.items()
            (mb, cb), = b.terms.items()
            mono = tuple(x + y for x, y in zip(ma, mb)) if ma else ma
            if mono and max(mono) > self.degree_cap:
                raise ParameterError(f"parameter degree exceeds cap {self.degree_cap}")
            prod = ca * cb
            return _raw({mono: prod} if prod != 0 else {}, a.names)
        out: dict = {}
        cap = self.degree_cap
        for ma, ca in a.terms.items():
            for mb, cb in b.terms.items():
                mono = tuple(x + y for x, y in zip(ma, mb))
                if mono and max(mono) > cap:
                    raise ParameterError(f"parameter degree exceeds cap {cap}")
                s = out.get(mono)
                out[mono] = ca * cb if s is None else s + ca * cb
        return _raw({m: c for m, c in out.items() if c != 0}, a.names)

    __rmul__ = __mul__

    def scale(self, factor) -> "ParamScalar":
        return self * factor

    def __truediv__(self, other):
        if isinstance(other, ParamScalar):
            other = other.constant_value()
        if other == 0:
            raise ZeroDivisionError("division of a parameter polynomial by zero")
        return _raw({m: c / other for m, c in self.terms.items()}, self.names)

    def __pow__(self, p: int):
        if not isinstance(p, int) or p < 0:
            raise ParameterError("only nonnegative integer powers of parameter polynomials")
        out = ParamScalar.const(1, self.names)
        base = self
        while p:
            if p & 1:
                out = out * base
            p >>= 1
            if p:
                base = base * base
        return out

    def __eq__(self, other):
        if isinstance(other, ParamScalar):
            try:
                a, b = self._align(other)
            except ParameterError:
                return False
            return a.terms == b.terms
        if other == 0:
            return not self.terms
        return self.is_constant() and self.constant_value() == other

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def map_coeffs(self, fn) -> "ParamScalar":
        return ParamScalar({m: fn(c) for m, c in self.terms.items()}, self.names)

    # -- binding -------------------------------------------------------------
    def bind(self, bindings: Mapping[str, object]) -> "ParamScalar":
        """Substitute some parameters; the result keeps the remaining names."""
        keep = tuple(n for n in self.names if n not in bindings)
        idx_keep = [self.names.index(n) for n in keep]
        bound = [(i, bindings[n]) for i, n in enumerate(self.names) if n in bindings]
        out: dict = {}
        for mono, coeff in self.terms.items():
            val = coeff
            for i, v in bound:
                if mono[i]:
                    val = val * v ** mono[i]
            key = tuple(mono[i] for i in idx_keep)
            s = out.get(key)
            out[key] = val if s is None else s + val
        return ParamScalar({m: c for m, c in out.items() if c != 0}, keep)

    def evaluate(self, bindings: Mapping[str, object], zero=0):
        missing = self.free_names() - set(bindings)
        if missing:
            raise ParameterError(f"unbound parameter(s): {', '.join(sorted(missing))}")
        return self.bind(bindings).constant_value(zero)

    def univariate(self, name: str) -> list:
        """Coefficient list (ascending) of a polynomial depending on ``name`` only."""
        others = self.free_names() - {name}
        if others:
            raise ParameterError(f"expected a polynomial in {name} only, found {sorted(others)}")
        if name not in self.names:
            return [self.constant_value()]
        idx = self.names.index(name)
        deg = self.degree(name)
        coeffs = [0] * (deg + 1)
        for mono, coeff in self.terms.items():
            coeffs[mono[idx]] = coeffs[mono[idx]] + coeff
        return coeffs

    def partial(self, name: str) -> "ParamScalar":
        idx = self.names.index(name)
        out = {}
        for mono, coeff in self.terms.items():
            e = mono[idx]
            if e:
                m = list(mono)
                m[idx] -= 1
                out[tuple(m)] = coeff * e
        return ParamScalar(out, self.names)

    # -- text ----------------------------------------------------------------
    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def to_text(self, fmt=None) -> str:
        """Render as e.g. ``1/3 + 4/3*c^2 + c^4``; ``fmt`` formats magnitudes."""
        fmt = fmt or _default_fmt
        if not self.terms:
            return "0"
        pieces = []
        for mono, coeff in self.sorted_terms():
            factors = []
            for n, e in zip(self.names, mono):
                if e == 1:
                    factors.append(n)
                elif e > 1:
                    factors.append(f"{n}^{e}")
            negative = coeff < 0
            mag = fmt(-coeff if negative else coeff)
            if factors:
                body = "*".join(factors) if mag == "1" else mag + "*" + "*".join(factors)
            else:
                body = mag
            pieces.append(("-" if negative else "+", body))
        sign, body = pieces[0]
        text = ("-" if sign == "-" else "") + body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    @classmethod
    def from_text(cls, text: str, names: tuple[str, ...], backend: Backend) -> "ParamScalar":
        text = text.strip()
        if not text:
            raise ValueError("empty coefficient text")
        pos = 0
        out = ParamScalar.const(0, names)
        first = True
        while pos < len(text):
            m = _MONO_RE.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"malformed coefficient text at {pos}: {text!r}")
            sign, number, factors = m.group("sign"), m.group("num"), m.group("factors")
            if sign is None and not first:
                raise ValueError(f"missing operator at {pos}: {text!r}")
            if number is None and not factors:
                raise ValueError(f"malformed coefficient text at {pos}: {text!r}")
            value = backend.scalar(Fraction(number)) if number else backend.scalar(1)
            if sign == "-":
                value = -value
            mono = [0] * len(names)
            for fac in filter(None, (f.strip() for f in (factors or "").split("*"))):
                nm, _, exp = fac.partition("^")
                if nm not in names:
                    raise ValueError(f"unknown parameter {nm!r} in {text!r}")
                mono[names.index(nm)] += int(exp) if exp else 1
            out = out + ParamScalar({tuple(mono): value}, names)
            pos = m.end()
            first = False
        return out

    def __repr__(self):
        return f"ParamScalar({self.to_text()!r})"


_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?(?:/\d+)?"
_FAC = r"[A-Za-z_]\w*(?:\^\d+)?"
_MONO_RE = re.compile(
    rf"\s*(?P<sign>[+-])?\s*(?:(?P<num>{_NUM})\s*\*?\s*)?"
    rf"(?P<factors>{_FAC}(?:\s*\*\s*{_FAC})*)?\s*")


def _default_fmt(value) -> str:
    if isinstance(value, Fraction):
        return RationalBackend().to_text(value)
    if isinstance(value, MPF):
        return libmp.to_str(value._mpf_, libmp.repr_dps(value.context.prec))
    return str(value)


def _raw(terms: dict, names: tuple) -> ParamScalar:
    # trusted constructor: terms already canonical
    obj = ParamScalar.__new__(ParamScalar)
    obj.names = names
    obj.terms = terms
    return obj


def unify_names(values: Iterable[ParamScalar]) -> tuple[str, ...]:
    names: tuple[str, ...] = ()
    for v in values:
        if v.names and v.names != names:
            if names:
                raise ParameterError(f"parameter sets differ: {names} vs {v.names}")
            names = v.names
    return names


def binomial(n: int, k: int) -> int:
    return math.comb(n, k)
