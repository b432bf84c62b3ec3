"""Truncated generalized log-power series.

A :class:`Series` is a finite sum of terms ``c * x**p * ln(x)**m`` with rational
``p >= 0``, integer ``m >= 0`` and :class:`~rilt.scalars.ParamScalar`
coefficients.  Every series carries a power cap (terms above it are discarded as
truncation) and a log cap (exceeding it is an error, never silent).
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Iterable, Mapping

from .scalars import (Backend, BackendError, FloatBackend, ParamScalar,
                      ParameterError, RationalBackend, make_backend, to_exponent,
                      unify_names)


class SeriesError(ValueError):
    pass


class LogCapError(SeriesError):
    pass


Key = tuple[Fraction, int]


def _frac(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, int):
        return Fraction(p)
    if isinstance(p, str):
        return Fraction(p)
    return to_exponent(p)


class Series:
    """Immutable log-power series.

    Parameters
    ----------
    terms
        Mapping ``(power, logpow) -> coefficient``; coefficients may be
        ``ParamScalar`` or plain scalars of the backend.
    power_cap
        Truncation order; terms with larger power are dropped.
    log_cap
        Largest admissible log power, defaults to ``ceil(power_cap)``.
    backend
        Scalar field of the coefficients.
    """

    __slots__ = ("_terms", "power_cap", "log_cap", "backend")

    def __init__(self, terms: Mapping | None = None, power_cap=8, log_cap: int | None = None,
                 backend: Backend | None = None):
        self.backend = backend if backend is not None else RationalBackend()
        self.power_cap = _frac(power_cap)
        self.log_cap = math.ceil(self.power_cap) if log_cap is None else int(log_cap)
        clean: dict = {}
        for (p, m), c in (terms or {}).items():
            p = _frac(p)
            m = int(m)
            if p < 0:
                raise SeriesError(f"negative power {p} is not representable")
            if m < 0:
                raise SeriesError(f"negative log power {m}")
            if p > self.power_cap:
                continue
            if m > self.log_cap:
                raise LogCapError(f"log power {m} exceeds log cap {self.log_cap}")
            if not isinstance(c, ParamScalar):
                c = ParamScalar.const(self.backend.scalar(c))
            if c.is_zero():
                continue
            prev = clean.get((p, m))
            c = c if prev is None else prev + c
            if c.is_zero():
                clean.pop((p, m), None)
            else:
                clean[(p, m)] = c
        self._terms = clean

    @classmethod
    def _make(cls, terms: dict, power_cap: Fraction, log_cap: int, backend) -> "Series":
        obj = cls.__new__(cls)
        obj._terms = terms
        obj.power_cap = power_cap
        obj.log_cap = log_cap
        obj.backend = backend
        return obj

    def like(self, terms: dict) -> "Series":
        """New series with this one's caps and backend (``terms`` must be clean)."""
        return Series._make(terms, self.power_cap, self.log_cap, self.backend)

    # -- inspection -----------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self) -> list:
        return sorted(self._terms.items(), key=lambda kv: kv[0])

    def coefficient(self, power, logpow: int = 0) -> ParamScalar:
        c = self._terms.get((_frac(power), logpow))
        return c if c is not None else ParamScalar.const(0)

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __iter__(self):
        return iter(self.items())

    def powers(self) -> list[Fraction]:
        return sorted({p for p, _ in self._terms})

    def valuation(self) -> Fraction | None:
        return min((p for p, _ in self._terms), default=None)

    def max_logpow(self) -> int:
        return max((m for _, m in self._terms), default=0)

    @property
    def names(self) -> tuple[str, ...]:
        return unify_names(self._terms.values())

    def is_polynomial(self) -> bool:
        return all(p.denominator == 1 and m == 0 for p, m in self._terms)

    def polynomial_part(self) -> "Series":
        return self.like({k: c for k, c in self._terms.items()
                          if k[0].denominator == 1 and k[1] == 0})

    def magnitude(self):
        """Largest coefficient magnitude over all terms and monomials."""
        best = 0
        for c in self._terms.values():
            m = c.magnitude()
            if m > best:
                best = m
        return best

    def with_caps(self, power_cap=None, log_cap=None) -> "Series":
        cap = self.power_cap if power_cap is None else _frac(power_cap)
        lcap = self.log_cap if log_cap is None else int(log_cap)
        terms = {}
        for (p, m), c in self._terms.items():
            if p > cap:
                continue
            if m > lcap:
                raise LogCapError(f"log power {m} exceeds log cap {lcap}")
            terms[(p, m)] = c
        return Series._make(terms, cap, lcap, self.backend)

    def map_coeffs(self, fn) -> "Series":
        out = {}
        for k, c in self._terms.items():
            c2 = fn(c)
            if not c2.is_zero():
                out[k] = c2
        return self.like(out)

    def bind(self, bindings: Mapping[str, object]) -> "Series":
        return self.map_coeffs(lambda c: c.bind(bindings))

    # -- arithmetic -------------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms))

    def __add__(self, other):
        return add(self, _coerce(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -_coerce(other, self))

    def __rsub__(self, other):
        return add(_coerce(other, self), -self)

    def __neg__(self):
        return self.like({k: -c for k, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, Series):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __pow__(self, p: int):
        return ipow(self, p)

    def __repr__(self):
        return f"Series({to_text(self)!r})"


def _coerce(value, like: Series) -> Series:
    if isinstance(value, Series):
        return value
    if not isinstance(value, ParamScalar):
        value = ParamScalar.const(like.backend.scalar(value))
    return like.like({(Fraction(0), 0): value} if not value.is_zero() else {})


def _check_compatible(a: Series, b: Series):
    if a.backend != b.backend:
        raise SeriesError(f"backend mismatch: {a.backend} vs {b.backend}")


# -- constructors -------------------------------------------------------------

def constant(value, power_cap=8, log_cap=None, backend=None) -> Series:
    s = Series({}, power_cap, log_cap, backend)
    return _coerce(value, s)


def monomial(power, logpow: int = 0, coeff=1, power_cap=8, log_cap=None, backend=None) -> Series:
    return Series({(power, logpow): coeff}, power_cap, log_cap, backend)


def zero_like(s: Series) -> Series:
    return s.like({})


def one_like(s: Series) -> Series:
    return _coerce(1, s)


def x_like(s: Series, power=1) -> Series:
    p = _frac(power)
    if p > s.power_cap:
        return s.like({})
    return s.like({(p, 0): ParamScalar.const(s.backend.scalar(1))})


def log_like(s: Series) -> Series:
    """The bare logarithm ``ln(x)`` with the caps of ``s``."""
    if s.log_cap < 1:
        raise LogCapError("log cap 0 cannot hold ln(x)")
    return s.like({(Fraction(0), 1): ParamScalar.const(s.backend.scalar(1))})


# -- ring operations ----------------------------------------------------------

def add(a: Series, b: Series) -> Series:
    _check_compatible(a, b)
    cap = max(a.power_cap, b.power_cap)
    lcap = max(a.log_cap, b.log_cap)
    out = dict(a._terms)
    for k, c in b._terms.items():
        prev = out.get(k)
        s = c if prev is None else prev + c
        if s.is_zero():
            out.pop(k, None)
        else:
            out[k] = s
    return Series._make(out, cap, lcap, a.backend)


def scale(a: Series, factor) -> Series:
    if isinstance(factor, ParamScalar):
        return a.map_coeffs(lambda c: c * factor)
    factor = a.backend.scalar(factor)
    if factor == 0:
        return a.like({})
    return a.like({k: c * factor for k, c in a._terms.items()})


def mul(a: Series, b: Series) -> Series:
    """Cauchy product truncated at the larger power cap."""
    _check_compatible(a, b)
    cap = max(a.power_cap, b.power_cap)
    lcap = max(a.log_cap, b.log_cap)
    if len(a._terms) > len(b._terms):
        a, b = b, a
    bt = sorted(b._terms.items(), key=lambda kv: kv[0][0])
    out: dict = {}
    for (p1, l1), c1 in a._terms.items():
        room = cap - p1
        for (p2, l2), c2 in bt:
            if p2 > room:
                break
            l = l1 + l2
            if l > lcap:
                raise LogCapError(f"log power {l} exceeds log cap {lcap} at x^{p1 + p2}")
            key = (p1 + p2, l)
            prod = c1 * c2
            prev = out.get(key)
            out[key] = prod if prev is None else prev + prod
    return Series._make({k: c for k, c in out.items() if not c.is_zero()}, cap, lcap, a.backend)


def ipow(a: Series, p: int) -> Series:
    if not isinstance(p, int) or p < 0:
        raise SeriesError("series powers must be nonnegative integers")
    result = one_like(a)
    base = a
    while p:
        if p & 1:
            result = mul(result, base)
        p >>= 1
        if p:
            base = mul(base, base)
    return result


def mul_log(a: Series, times: int = 1) -> Series:
    """Multiply by ``ln(x)**times``."""
    out = {}
    for (p, m), c in a._terms.items():
        if m + times > a.log_cap:
            raise LogCapError(f"log power {m + times} exceeds log cap {a.log_cap}")
        out[(p, m + times)] = c
    return a.like(out)


def shift(a: Series, s) -> Series:
    """Multiply by ``x**s``; negative resulting powers are errors."""
    s = _frac(s)
    out = {}
    for (p, m), c in a._terms.items():
        q = p + s
        if q < 0:
            raise SeriesError(f"shift by {s} produces negative power {q}")
        if q <= a.power_cap:
            out[(q, m)] = c
    return a.like(out)


# -- substitution and composition --------------------------------------------

def _rpow(base, p: Fraction, backend: Backend):
    """``base**p`` for positive scalar base and rational exponent."""
    if isinstance(backend, RationalBackend):
        base = Fraction(base)
        if p.denominator == 1:
            return base ** p.numerator
        num = _exact_root(base.numerator, p.denominator)
        den = _exact_root(base.denominator, p.denominator)
        if num is None or den is None:
            raise BackendError(f"{base}^{p} is irrational")
        return Fraction(num, den) ** p.numerator
    ctx = backend.ctx
    base = backend.scalar(base)
    if p.denominator == 1:
        return base ** p.numerator
    return ctx.power(base, backend.scalar(p))


def _exact_root(n: int, k: int):
    r = round(n ** (1.0 / k)) if n > 0 else 0
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** k == n:
            return cand
    return None


def _log(value, backend: Backend):
    if value == 1:
        return backend.scalar(0)
    if isinstance(backend, RationalBackend):
        raise BackendError(f"ln({value}) is irrational")
    return backend.ctx.ln(backend.scalar(value))


def substitute_affine(a: Series, lam, b=0) -> Series:
    """Return ``a(lam*x + b)``.

    For ``b == 0`` any series is accepted and ``x**k ln(x)**m`` becomes
    ``lam**k x**k (ln(lam) + ln(x))**m``.  A nonzero ``b`` needs a pure
    polynomial, which is re-expanded exactly about the origin.
    """
    be = a.backend
    lam = be.scalar(lam)
    b = be.scalar(b)
    if not lam > 0:
        raise SeriesError(f"scale factor must be positive, got {lam}")
    out: dict = {}

    def acc(key, c):
        prev = out.get(key)
        out[key] = c if prev is None else prev + c

    if b == 0:
        if lam == 1:
            return a
        lnlam = None
        for (p, m), c in a._terms.items():
            base = c * _rpow(lam, p, be)
            if m == 0:
                acc((p, 0), base)
                continue
            if lnlam is None:
                lnlam = _log(lam, be)
            for j in range(m + 1):
                coeff = math.comb(m, j) * lnlam ** (m - j) if m - j else 1
                acc((p, j), base * coeff)
    else:
        if not a.is_polynomial():
            raise SeriesError("a shifted argument needs a pure polynomial series")
        for (p, _), c in a._terms.items():
            k = p.numerator
            for j in range(k + 1):
                if j > a.power_cap:
                    break
                coeff = math.comb(k, j) * lam ** j * b ** (k - j)
                if coeff != 0:
                    acc((Fraction(j), 0), c * coeff)
    return a.like({k: c for k, c in out.items() if not c.is_zero()})


def compose(outer: Series, inner: Series) -> Series:
    """Polynomial composition ``outer(inner(x))`` truncated at the power cap."""
    _check_compatible(outer, inner)
    if not outer.is_polynomial() or not inner.is_polynomial():
        raise SeriesError("composition needs pure polynomial series")
    if not outer:
        return outer.like({})
    inner = inner.with_caps(max(outer.power_cap, inner.power_cap))
    degree = int(max(p for p, _ in outer._terms))
    result = _coerce(outer.coefficient(degree), inner)
    for k in range(degree - 1, -1, -1):
        result = add(mul(result, inner), _coerce(outer.coefficient(k), inner))
    return result


# -- calculus -------------------------------------------------------------------

def diff(a: Series) -> Series:
    out: dict = {}
    for (p, m), c in a._terms.items():
        for key, factor in (((p - 1, m), p), ((p - 1, m - 1), m)):
            if factor == 0:
                continue
            if key[0] < 0:
                raise SeriesError(f"derivative of x^{p} ln(x)^{m} has negative power {key[0]}")
            val = c * a.backend.scalar(factor)
            prev = out.get(key)
            out[key] = val if prev is None else prev + val
    return a.like({k: c for k, c in out.items() if not c.is_zero()})


def antideriv(a: Series) -> Series:
    """Integral from 0 to x, term by term; the power cap grows by one."""
    be = a.backend
    out: dict = {}
    for (p, m), c in a._terms.items():
        q = p + 1
        # x^{p+1} sum_j (-1)^j m!/(m-j)! ln^{m-j} x / q^{j+1}
        for j in range(m + 1):
            coeff = Fraction((-1) ** j * math.factorial(m) // math.factorial(m - j)) / q ** (j + 1)
            key = (q, m - j)
            val = c * be.scalar(coeff)
            prev = out.get(key)
            out[key] = val if prev is None else prev + val
    return Series._make({k: c for k, c in out.items() if not c.is_zero()},
                        a.power_cap + 1, a.log_cap, be)


# -- evaluation -----------------------------------------------------------------

def _point_factors(a: Series, x):
    be = a.backend
    x = be.scalar(x)
    if x < 0:
        raise SeriesError(f"cannot evaluate a log-power series at x = {x} < 0")
    lnx = None
    cache = {}
    for (p, m) in a._terms:
        if x == 0:
            if p == 0 and m > 0:
                raise SeriesError("bare logarithm term diverges at x = 0")
            cache[(p, m)] = be.scalar(1) if p == 0 else be.scalar(0)
            continue
        xp = _rpow(x, p, be)
        if m:
            if lnx is None:
                lnx = _log(x, be)
            xp = xp * lnx ** m
        cache[(p, m)] = xp
    return cache


def evaluate(a: Series, x, bindings: Mapping[str, object] | None = None):
    """Numeric value of the series at ``x`` with every parameter bound."""
    be = a.backend
    bindings = {k: be.scalar(v) for k, v in (bindings or {}).items()}
    factors = _point_factors(a, x)
    total = be.scalar(0)
    for key, c in a._terms.items():
        total += c.evaluate(bindings) * factors[key]
    return total


def evaluate_symbolic(a: Series, x) -> ParamScalar:
    """Value at ``x`` as a polynomial in the free parameters."""
    factors = _point_factors(a, x)
    total = ParamScalar.const(0, a.names)
    for key, c in a._terms.items():
        total = total + c * factors[key]
    return total


# -- function expansion ---------------------------------------------------------

def _maclaurin(fn: str, n: int) -> Fraction:
    if fn == "exp":
        return Fraction(1, math.factorial(n))
    if fn == "sin":
        return Fraction((-1) ** ((n - 1) // 2), math.factorial(n)) if n % 2 else Fraction(0)
    if fn == "cos":
        return Fraction((-1) ** (n // 2), math.factorial(n)) if n % 2 == 0 else Fraction(0)
    if fn == "ln1p":
        return Fraction((-1) ** (n + 1), n) if n else Fraction(0)
    raise SeriesError(f"no expansion for {fn!r}")


EXPANDABLE = ("sin", "cos", "exp", "ln1p")


def expand_function(fn: str, arg: Series) -> Series:
    """``fn(arg)`` by Maclaurin composition; ``arg`` must vanish at the origin."""
    if fn not in EXPANDABLE:
        raise SeriesError(f"no expansion for {fn!r}")
    if not arg:
        return _coerce(_maclaurin(fn, 0), arg)
    v = arg.valuation()
    if v <= 0:
        raise SeriesError(f"{fn} needs an argument with positive valuation, got {v}")
    nmax = math.floor(arg.power_cap / v)
    be = arg.backend
    result = _coerce(_maclaurin(fn, 0), arg)
    power = arg
    for n in range(1, nmax + 1):
        if not power:
            break
        c = _maclaurin(fn, n)
        if c:
            result = add(result, scale(power, be.scalar(c)))
        if n < nmax:
            power = mul(power, arg)
    return result


def exp_log_factor(delta: Series, sign: int = 1) -> Series:
    """``x**(sign*delta) = exp(sign*delta*ln x)`` for ``delta`` vanishing at 0."""
    if not delta:
        return one_like(delta)
    v = delta.valuation()
    if v <= 0:
        raise SeriesError("variable exponent part must have positive valuation")
    arg = mul_log(scale(delta, sign))
    return expand_function("exp", arg)


def split_constant(beta: Series):
    """Split ``beta`` into its rational constant term and the remainder."""
    const = beta.coefficient(0, 0)
    if not const.is_constant():
        raise SeriesError("variable exponent constant term depends on parameters")
    b0 = to_exponent(const.constant_value(beta.backend.scalar(0)), beta.backend)
    delta = add(beta, _coerce(-beta.backend.scalar(b0), beta))
    return b0, delta


def expand_variable_exponent(beta: Series, sign: int = 1) -> Series:
    """Expand ``x**(sign*beta(x))`` as ``x**(sign*b0) * sum (sign*(beta-b0) ln x)**n / n!``."""
    if sign not in (1, -1):
        raise SeriesError("sign must be +1 or -1")
    b0, delta = split_constant(beta)
    if delta and delta.valuation() <= 0:
        raise SeriesError("beta - beta(0) must vanish at the origin")
    s = sign * b0
    if s < 0:
        raise SeriesError(f"x^{s} has a negative power")
    factor = exp_log_factor(delta.with_caps(max(beta.power_cap - s, 0)), sign) if s > 0 \
        else exp_log_factor(delta, sign)
    return shift(factor.with_caps(beta.power_cap), s)


# -- text format ------------------------------------------------------------------

def _lcm(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def lattice_of(a: Series) -> int:
    return _lcm(p.denominator for p, _ in a._terms)


def to_text(a: Series) -> str:
    """Human readable rendering, e.g. ``2 + (c)*x^3/2*ln(x)^2``."""
    if not a:
        return "0"
    parts = []
    for (p, m), c in a.items():
        factors = []
        if p:
            factors.append("x" if p == 1 else f"x^{p}")
        if m:
            factors.append("ln(x)" if m == 1 else f"ln(x)^{m}")
        coeff = c.to_text(a.backend.to_text if isinstance(a.backend, FloatBackend) else None)
        parts.append(f"({coeff})" + ("*" + "*".join(factors) if factors else ""))
    return " + ".join(parts)


def serialize(a: Series, lattice: int | None = None) -> str:
    """JSON text: lattice, caps, backend, parameter names and sorted terms."""
    be = a.backend
    q = _lcm([lattice or 1, lattice_of(a)])
    doc = {
        "lattice": q,
        "power_cap": f"{a.power_cap.numerator}/{a.power_cap.denominator}",
        "log_cap": a.log_cap,
        "backend": be.name,
        "precision": be.precision,
        "params": list(a.names),
        "terms": [
            {"p": f"{p.numerator}/{p.denominator}", "l": m, "c": c.to_text(be.to_text)}
            for (p, m), c in a.items()
        ],
    }
    return json.dumps(doc, indent=1)


def parse_series(text: str | dict, backend: Backend | None = None) -> Series:
    try:
        doc = json.loads(text) if isinstance(text, str) else text
        names = tuple(doc.get("params", ()))
        if backend is None:
            backend = make_backend(doc.get("backend", "rational"), doc.get("precision") or 50)
        cap = Fraction(doc.get("power_cap", "8"))
        terms = {}
        for entry in doc["terms"]:
            key = (Fraction(entry["p"]), int(entry["l"]))
            if key in terms:
                raise SeriesError(f"duplicate term {key}")
            terms[key] = ParamScalar.from_text(entry["c"], names, backend)
        if not isinstance(doc.get("lattice", 1), int) or doc.get("lattice", 1) < 1:
            raise SeriesError("lattice must be a positive integer")
        cap = max([cap] + [p for p, _ in terms])
        return Series(terms, cap, doc.get("log_cap"), backend)
    except (KeyError, TypeError, ValueError, ParameterError) as exc:
        if isinstance(exc, SeriesError):
            raise
        raise SeriesError(f"malformed series text: {exc}") from exc
