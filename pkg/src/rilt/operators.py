"""Term-wise operator kernels acting on log-power series.

* ``caputo_apply``: forward Caputo derivative through the power rule
  ``D^a x^t = Q(t, a) x^(t - a)``, with ``ln`` powers produced by t-derivatives.
* ``rilt_kernel_apply``: the inverse of ``x^a D^a`` on the surviving subspace,
  i.e. ``x^t ln^m x -> d_t^m [R(t, a) x^t]``.
* ``volterra_apply``: convolution with ``(x - z)^(-mu)`` via Beta integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import series as S
from .scalars import ParamScalar, to_exponent
from .series import Series, SeriesError
from .special import beta_derivs, gamma_ratio_derivs, reciprocal_ratio_derivs


class GateError(SeriesError):
    """A term falls inside the band swept by a variable order."""


@dataclass(frozen=True)
class ConstantOrder:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", to_exponent(self.value))
        if self.value < 0:
            raise ValueError(f"negative order {self.value}")

    @property
    def alpha0(self) -> Fraction:
        return self.value

    @property
    def ic_count(self) -> int:
        return math.ceil(self.value)

    variable = False

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class VariableOrder:
    """Order ``alpha(x)`` given as a series with rational constant term.

    ``band`` is the (min, max) of alpha over the solution domain; terms strictly
    inside it (other than ``alpha0`` itself) have no defined gate.
    """

    series: Series
    band: tuple = field(default=None, compare=False)
    alpha0: Fraction = field(init=False)
    delta: Series = field(init=False, compare=False)

    variable = True

    def __post_init__(self):
        a0, delta = S.split_constant(self.series)
        if delta and delta.valuation() <= 0:
            raise SeriesError("alpha(x) - alpha(0) must vanish at the origin")
        if delta.names:
            raise SeriesError("a variable order cannot depend on free parameters")
        object.__setattr__(self, "alpha0", a0)
        object.__setattr__(self, "delta", delta)
        if self.band is None:
            object.__setattr__(self, "band", _sample_band(self.series))

    @property
    def ic_count(self) -> int:
        return math.ceil(self.alpha0)

    def __str__(self):
        return f"alpha(x) with alpha(0) = {self.alpha0}"


Order = ConstantOrder | VariableOrder


def _sample_band(alpha: Series, end=1, points=201):
    vals = [S.evaluate(alpha, Fraction(i, points - 1) * end) for i in range(points)]
    return min(vals), max(vals)


def _gate(k: Fraction, order: Order) -> bool:
    """True when the term survives; raises inside a variable-order band."""
    a0 = order.alpha0
    if order.variable and k != a0 and order.delta:
        lo, hi = order.band
        kv = order.series.backend.scalar(k)
        if lo < kv < hi:
            raise GateError(f"term x^{k} lies inside the range ({lo}, {hi}) of the variable order")
    return k >= a0


def _acc(out: dict, key, val: ParamScalar):
    prev = out.get(key)
    out[key] = val if prev is None else prev + val


def _clean(out: dict) -> dict:
    return {k: c for k, c in out.items() if not c.is_zero()}


# -- constant order -------------------------------------------------------------

def _constant_map(u: Series, alpha: Fraction, shift: Fraction, table_fn) -> Series:
    out: dict = {}
    be = u.backend
    for (k, m), c in u._terms.items():
        if k < alpha:
            continue
        tab = table_fn(k, alpha, m, 0, be)
        p = k + shift
        if p > u.power_cap:
            continue
        for r in range(m + 1):
            v = tab[m - r, 0]
            if v != 0:
                _acc(out, (p, r), c * (math.comb(m, r) * v))
    return u.like(_clean(out))


# -- variable order helpers ---------------------------------------------------------

class _VarContext:
    """Cached powers ``delta^b / b!`` and table depth for one order and cap."""

    def __init__(self, order: VariableOrder, like: Series):
        self.order = order
        self.like = like
        if order.delta.backend != like.backend:
            raise SeriesError("order and series use different backends")
        self.delta = order.delta.with_caps(like.power_cap, like.log_cap)
        self.v = self.delta.valuation() if self.delta else None
        self._pows = [S.one_like(like)]

    def depth(self, room: Fraction) -> int:
        if self.v is None or room < 0:
            return 0
        return int(room / self.v)

    def dpow(self, b: int) -> Series:
        while len(self._pows) <= b:
            j = len(self._pows)
            nxt = S.scale(S.mul(self._pows[-1], self.delta), self.like.backend.scalar(Fraction(1, j)))
            self._pows.append(nxt)
        return self._pows[b]

    def kernel_series(self, tab, a: int, depth: int) -> Series:
        """``sum_b tab[a][b] delta^b / b!`` as an x-series."""
        acc = S.zero_like(self.like)
        for b in range(depth + 1):
            v = tab[a, b]
            if v != 0:
                acc = S.add(acc, S.scale(self.dpow(b), v))
        return acc


def _var_term_standard(ctx: _VarContext, k, m, c, table_fn) -> Series:
    """``d_t^m [K(t, alpha(x)) x^t]`` at ``t = k`` times ``c``."""
    like = ctx.like
    depth = ctx.depth(like.power_cap - k)
    tab = table_fn(k, ctx.order.alpha0, m, depth, like.backend)
    total = S.zero_like(like)
    base = like.like({(k, 0): c})
    for r in range(m + 1):
        ks = ctx.kernel_series(tab, m - r, depth)
        if not ks:
            continue
        piece = S.mul(ks, base)
        if r:
            piece = S.mul_log(piece, r)
        total = S.add(total, S.scale(piece, like.backend.scalar(math.comb(m, r))))
    return total


# -- public operators -------------------------------------------------------------

def caputo_standard(u: Series, order: Order) -> Series:
    """``x^alpha * D^alpha u``: powers are kept, only coefficients and logs change."""
    if not order.variable:
        return _constant_map(u, order.value, Fraction(0), reciprocal_ratio_derivs)
    ctx = _VarContext(order, u)
    total = S.zero_like(u)
    for (k, m), c in u.items():
        if not _gate(k, order):
            continue
        total = S.add(total, _var_term_standard(ctx, k, m, c, reciprocal_ratio_derivs))
    return total


def caputo_apply(u: Series, order: Order) -> Series:
    """Caputo derivative ``D^alpha u`` term by term."""
    if not order.variable:
        return _constant_map(u, order.value, -order.value, reciprocal_ratio_derivs)
    a0 = order.alpha0
    std = caputo_standard(u, order)
    if not std:
        return std
    # D^a u = x^(-a(x)) * (x^a D^a u) = x^(-a0) * x^(-delta) * std
    factor = S.exp_log_factor(order.delta.with_caps(u.power_cap), -1) if order.delta \
        else S.one_like(u)
    if factor.backend != u.backend:
        raise SeriesError("order and series use different backends")
    return S.shift(S.mul(std, factor), -a0)


def rilt_kernel_apply(rhs: Series, order: Order, ic_count: int | None = None) -> Series:
    """Step kernel: the series ``v`` with ``x^alpha D^alpha v = rhs`` on gated terms."""
    if ic_count is not None and ic_count != order.ic_count:
        raise ValueError(f"order {order} needs {order.ic_count} initial conditions, got {ic_count}")
    if not order.variable:
        return _constant_map(rhs, order.value, Fraction(0), gamma_ratio_derivs)
    for (k, _m) in rhs._terms:
        _gate(k, order)
    if not order.delta:
        return _constant_map(rhs, order.alpha0, Fraction(0), gamma_ratio_derivs)
    # forward substitution on the triangular map x^t ln^m -> Q x^t ln^m + higher powers
    ctx = _VarContext(order, rhs)
    pending = {key: c for key, c in rhs._terms.items() if key[0] >= order.alpha0}
    out: dict = {}
    be = rhs.backend
    while pending:
        key = min(pending, key=lambda km: (km[0], -km[1]))
        k, m = key
        c = pending.pop(key)
        q0 = reciprocal_ratio_derivs(k, order.alpha0, 0, 0, be)[0, 0]
        coeff = c / q0
        _acc(out, key, coeff)
        image = _var_term_standard(ctx, k, m, coeff, reciprocal_ratio_derivs)
        for ikey, ic in image._terms.items():
            if ikey == key:
                continue
            prev = pending.get(ikey)
            val = -ic if prev is None else prev - ic
            if val.is_zero():
                pending.pop(ikey, None)
            else:
                pending[ikey] = val
    return rhs.like(_clean(out))


def volterra_apply(integrand: Series, mu) -> Series:
    """``int_0^x f(z) (x - z)^(-mu) dz`` term by term."""
    mu = to_exponent(mu) if not isinstance(mu, Fraction) else mu
    if not 0 < mu < 1:
        raise SeriesError(f"mu must lie in (0, 1), got {mu}")
    out: dict = {}
    be = integrand.backend
    for (a, b), c in integrand._terms.items():
        p = a + 1 - mu
        if p > integrand.power_cap:
            continue
        derivs = beta_derivs(a, mu, b, be)
        for r in range(b + 1):
            v = derivs[b - r]
            if v != 0:
                _acc(out, (p, r), c * (math.comb(b, r) * v))
    return integrand.like(_clean(out))


def delay_apply(u: Series, lam, b=0) -> Series:
    return S.substitute_affine(u, lam, b)
