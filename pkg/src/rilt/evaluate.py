"""Evaluation of expression trees: as log-power series and pointwise."""
from __future__ import annotations

import math
from fractions import Fraction

from . import series as S
from .expr import (Add, Caputo, Compose, Delay, Div, Fredholm, Func, IntPow, Mul, NamedConst,
                   Neg, Node, Num, ODeriv, Param, Unknown, Volterra, X, XPow, unknowns_in)
from .operators import ConstantOrder, VariableOrder, caputo_apply, volterra_apply
from .scalars import Backend, BackendError, ParamScalar, RationalBackend, to_exponent
from .series import Series, SeriesError
from .special import gamma_series_coeffs


class EvalError(ValueError):
    """Evaluation failure annotated with the path to the failing node."""

    def __init__(self, message: str, path: tuple = ()):
        self.path = path
        where = " > ".join(path)
        super().__init__(f"{message} [at {where}]" if where else message)


def _label(node: Node) -> str:
    name = type(node).__name__
    extra = getattr(node, "name", None)
    return f"{name}({extra})" if isinstance(extra, str) else name


class SeriesEvaluator:
    """Expands expression trees into series for one solve.

    Results of subtrees that do not mention any unknown are cached, so forcing
    terms are expanded once per solve.  ``project`` lets shifted delays and
    compositions act on the polynomial part of a transient non-polynomial
    iterate; the largest discarded coefficient is recorded in
    ``projected_mass``.
    """

    def __init__(self, backend: Backend, power_cap, log_cap=None, names: tuple = (),
                 domain_end=1, project: bool = False, param_values: dict | None = None):
        self.backend = backend
        self.power_cap = Fraction(power_cap)
        self.log_cap = math.ceil(self.power_cap) if log_cap is None else log_cap
        self.names = tuple(names)
        self.domain_end = domain_end
        self.project = project
        self.param_values = dict(param_values or {})
        self.projected_mass = 0
        self._cache: dict = {}
        self._free: dict = {}
        self._orders: dict = {}
        self._keep: list = []

    # -- helpers ---------------------------------------------------------------
    def zero(self) -> Series:
        return Series._make({}, self.power_cap, self.log_cap, self.backend)

    def const(self, value) -> Series:
        if not isinstance(value, ParamScalar):
            value = ParamScalar.const(self.backend.scalar(value))
        return S._coerce(value, self.zero())

    def _is_free(self, node) -> bool:
        key = id(node)
        hit = self._free.get(key)
        if hit is None:
            hit = not unknowns_in(node)
            self._free[key] = hit
            self._keep.append(node)
        return hit

    def scalar_of(self, node, current, path=()):
        """Evaluate a node that must reduce to a parameter-free constant."""
        s = self.value(node, current, path)
        if any(k != (0, 0) for k in s._terms):
            raise EvalError("expected a constant, got a function of x", path)
        c = s.coefficient(0, 0)
        if not c.is_constant():
            raise EvalError("expected a number, got a parameter expression", path)
        return c.constant_value(self.backend.scalar(0))

    def order_of(self, node, path=()):
        key = id(node)
        hit = self._orders.get(key)
        if hit is not None:
            return hit
        s = self.value(node, {}, path)
        if all(k == (0, 0) for k in s._terms):
            c = s.coefficient(0, 0)
            if not c.is_constant():
                raise EvalError("fractional orders must be numeric; bind the parameter", path)
            order = ConstantOrder(to_exponent(c.constant_value(self.backend.scalar(0)), self.backend))
        else:
            order = VariableOrder(s, band=order_band(node, self.backend, self.domain_end,
                                                    self.param_values))
        self._orders[key] = order
        self._keep.append(node)
        return order

    def value(self, node: Node, current: dict, path=()) -> Series:
        s, off = self.eval(node, current, path)
        return self._materialize(s, off, path + (_label(node),))

    def _materialize(self, s: Series, off, path) -> Series:
        if off == 0:
            return s
        try:
            return S.shift(s, off)
        except SeriesError as exc:
            raise EvalError(str(exc), path) from exc

    # -- dispatch ----------------------------------------------------------------
    def eval(self, node: Node, current: dict, path=()):
        path = path + (_label(node),)
        if self._is_free(node):
            key = id(node)
            hit = self._cache.get(key)
            if hit is None:
                hit = self._eval(node, current, path)
                self._cache[key] = hit
            return hit
        return self._eval(node, current, path)

    def _eval(self, node: Node, current: dict, path):
        try:
            return self._dispatch(node, current, path)
        except EvalError:
            raise
        except (SeriesError, BackendError, ValueError, ZeroDivisionError) as exc:
            raise EvalError(str(exc), path) from exc

    def _dispatch(self, node, current, path):
        be = self.backend
        if isinstance(node, Num):
            return self.const(node.value), Fraction(0)
        if isinstance(node, NamedConst):
            if node.name != "pi":
                raise EvalError(f"unknown constant {node.name}", path)
            if isinstance(be, RationalBackend):
                be.require_float("pi")
            return self.const(be.ctx.pi), Fraction(0)
        if isinstance(node, Param):
            if node.name in self.param_values:
                return self.const(self.param_values[node.name]), Fraction(0)
            if node.name not in self.names:
                raise EvalError(f"undeclared parameter {node.name!r}", path)
            return self.const(ParamScalar.param(node.name, self.names, be.scalar(1))), Fraction(0)
        if isinstance(node, X):
            return S.x_like(self.zero()), Fraction(0)
        if isinstance(node, Unknown):
            if node.name not in current:
                raise EvalError(f"no current value for unknown {node.name!r}", path)
            return current[node.name], Fraction(0)
        if isinstance(node, Add):
            parts = [self.eval(t, current, path) for t in node.terms]
            off = min(o for _, o in parts)
            total = self.zero()
            for s, o in parts:
                total = S.add(total, s if o == off else S.shift(s, o - off))
            return total, off
        if isinstance(node, Neg):
            s, o = self.eval(node.arg, current, path)
            return -s, o
        if isinstance(node, Mul):
            s, off = self.eval(node.factors[0], current, path)
            for f in node.factors[1:]:
                t, o = self.eval(f, current, path)
                s = S.mul(s, t)
                off += o
            return s, off
        if isinstance(node, Div):
            den = self.scalar_of(node.den, current, path)
            if den == 0:
                raise EvalError("division by zero", path)
            s, o = self.eval(node.num, current, path)
            return S.scale(s, 1 / den), o
        if isinstance(node, IntPow):
            if node.exp < 0:
                base = self.scalar_of(node.base, current, path)
                if base == 0:
                    raise EvalError("zero to a negative power", path)
                return self.const((1 / base) ** (-node.exp)), Fraction(0)
            s, o = self.eval(node.base, current, path)
            return S.ipow(s, node.exp), o * node.exp
        if isinstance(node, Func):
            return self._func(node, current, path), Fraction(0)
        if isinstance(node, XPow):
            beta = self.value(node.beta, current, path)
            b0, delta = S.split_constant(beta)
            factor = S.exp_log_factor(delta, node.sign)
            return factor, node.sign * b0
        if isinstance(node, Caputo):
            order = self.order_of(node.order, path)
            return caputo_apply(self.value(node.arg, current, path), order), Fraction(0)
        if isinstance(node, ODeriv):
            s = self.value(node.arg, current, path)
            for _ in range(node.n):
                s = S.diff(s)
            return s, Fraction(0)
        if isinstance(node, Delay):
            lam = self.scalar_of(node.lam, current, path)
            b = self.scalar_of(node.shift, current, path)
            if node.name not in current:
                raise EvalError(f"no current value for unknown {node.name!r}", path)
            return self._affine(current[node.name], lam, b, path), Fraction(0)
        if isinstance(node, Volterra):
            mu = to_exponent(self.scalar_of(node.mu, current, path), be)
            return volterra_apply(self.value(node.arg, current, path), mu), Fraction(0)
        if isinstance(node, Fredholm):
            if node.param in self.param_values:
                c = self.const(self.param_values[node.param])
            else:
                c = self.const(ParamScalar.param(node.param, self.names, be.scalar(1)))
            s, o = self.eval(node.basis, current, path)
            return S.mul(c, s), o
        if isinstance(node, Compose):
            if node.name not in current:
                raise EvalError(f"no current value for unknown {node.name!r}", path)
            inner = self.value(node.arg, current, path)
            affine = _affine_parts(inner)
            if affine is not None:
                return self._affine(current[node.name], affine[0], affine[1], path), Fraction(0)
            outer = self._poly(current[node.name], path)
            return S.compose(outer, self._poly(inner, path)), Fraction(0)
        raise EvalError(f"cannot expand node {node!r}", path)

    def _poly(self, s: Series, path) -> Series:
        if s.is_polynomial():
            return s
        if not self.project:
            raise EvalError("operation needs a pure polynomial series", path)
        rest = S.add(s, -s.polynomial_part())
        mag = rest.magnitude()
        if mag > self.projected_mass:
            self.projected_mass = mag
        return s.polynomial_part()

    def _affine(self, u: Series, lam, b, path) -> Series:
        if b != 0:
            u = self._poly(u, path)
        return S.substitute_affine(u, lam, b)

    def _func(self, node: Func, current, path) -> Series:
        be = self.backend
        if node.name == "ln":
            if not isinstance(node.arg, X):
                raise EvalError("ln is only available for the bare variable x; use ln1p", path)
            return S.log_like(self.zero())
        arg = self.value(node.arg, current, path)
        c0 = arg.coefficient(0, 0)
        if not c0.is_constant():
            raise EvalError(f"{node.name} of a parameter-dependent constant term", path)
        c0 = c0.constant_value(be.scalar(0))
        d = S.add(arg, self.const(-c0)) if c0 != 0 else arg
        if d and d.valuation() <= 0:
            raise EvalError(f"{node.name} argument has terms with zero power", path)
        name = node.name
        if name in ("gamma", "rgamma"):
            v = d.valuation() if d else None
            depth = 0 if v is None else int(self.power_cap / v)
            coeffs = gamma_series_coeffs(c0, depth, be, reciprocal=(name == "rgamma"))
            total = self.zero()
            power = S.one_like(total)
            for j, cj in enumerate(coeffs):
                if j:
                    power = S.mul(power, d)
                    if not power:
                        break
                total = S.add(total, S.scale(power, cj))
            return total
        if c0 == 0:
            return S.expand_function(name, d)
        if isinstance(be, RationalBackend):
            be.require_float(f"{name} at a nonzero constant")
        ctx = be.ctx
        if name == "exp":
            return S.scale(S.expand_function("exp", d), ctx.exp(c0))
        if name in ("sin", "cos"):
            sd, cd = S.expand_function("sin", d), S.expand_function("cos", d)
            s0, k0 = ctx.sin(c0), ctx.cos(c0)
            if name == "sin":
                return S.add(S.scale(cd, s0), S.scale(sd, k0))
            return S.add(S.scale(cd, k0), S.scale(sd, -s0))
        if name == "ln1p":
            if c0 <= -1:
                raise EvalError("ln1p of a constant term <= -1", path)
            rest = S.expand_function("ln1p", S.scale(d, 1 / (1 + c0)))
            return S.add(rest, self.const(ctx.log1p(c0)))
        raise EvalError(f"unknown function {name}", path)


def _affine_parts(inner: Series):
    if not inner.is_polynomial() or any(k[0] > 1 for k in inner._terms):
        return None
    lam = inner.coefficient(1, 0)
    b = inner.coefficient(0, 0)
    if not (lam.is_constant() and b.is_constant()):
        return None
    zero = inner.backend.scalar(0)
    lam, b = lam.constant_value(zero), b.constant_value(zero)
    if not lam > 0:
        return None
    return lam, b


# -- pointwise evaluation -------------------------------------------------------------

def order_band(node: Node, backend: Backend, end=1, param_values=None, points=201):
    ctx = _point_ctx(backend)
    f = compile_point(node, ctx, param_values or {})
    end = Fraction(end)
    end = ctx.mpf(end.numerator) / end.denominator
    vals = [f(end * i / (points - 1), {}) for i in range(points)]
    lo, hi = min(vals), max(vals)
    return backend.scalar(lo), backend.scalar(hi)


def _point_ctx(backend: Backend):
    if isinstance(backend, RationalBackend):
        import mpmath
        ctx = mpmath.MPContext()
        ctx.dps = 30
        return ctx
    return backend.ctx


def compile_point(node: Node, ctx, params: dict, funcs: dict | None = None):
    """Compile ``node`` into ``f(x, values)``.

    ``values`` maps unknown names to their values at ``x``; ``funcs`` maps
    unknown names to callables, needed by delays, compositions and the
    integral/derivative nodes.  Caputo and Volterra nodes are integrated
    numerically (tanh-sinh handles the endpoint singularities).
    """
    funcs = funcs or {}
    mpf = ctx.mpf

    def num(v: Fraction):
        return mpf(v.numerator) / v.denominator

    def go(n: Node):
        if isinstance(n, Num):
            c = num(n.value)
            return lambda x, v: c
        if isinstance(n, NamedConst):
            c = ctx.pi
            return lambda x, v: c
        if isinstance(n, Param):
            if n.name not in params:
                raise EvalError(f"unbound parameter {n.name!r}")
            c = ctx.mpf(params[n.name]) if not isinstance(params[n.name], Fraction) \
                else num(params[n.name])
            return lambda x, v: c
        if isinstance(n, X):
            return lambda x, v: x
        if isinstance(n, Unknown):
            name = n.name
            fn = funcs.get(name)
            if fn is None:
                return lambda x, v: v[name]
            return lambda x, v: v[name] if name in v else fn(x)
        if isinstance(n, Add):
            parts = [go(t) for t in n.terms]
            return lambda x, v: ctx.fsum(p(x, v) for p in parts)
        if isinstance(n, Neg):
            a = go(n.arg)
            return lambda x, v: -a(x, v)
        if isinstance(n, Mul):
            parts = [go(t) for t in n.factors]

            def mul(x, v):
                out = parts[0](x, v)
                for p in parts[1:]:
                    out = out * p(x, v)
                return out
            return mul
        if isinstance(n, Div):
            a, b = go(n.num), go(n.den)
            return lambda x, v: a(x, v) / b(x, v)
        if isinstance(n, IntPow):
            a, e = go(n.base), n.exp
            return lambda x, v: a(x, v) ** e
        if isinstance(n, Func):
            a = go(n.arg)
            fn = {"sin": ctx.sin, "cos": ctx.cos, "exp": ctx.exp, "ln1p": ctx.log1p,
                  "gamma": ctx.gamma, "rgamma": ctx.rgamma, "ln": ctx.ln}[n.name]
            return lambda x, v: fn(a(x, v))
        if isinstance(n, XPow):
            b, s = go(n.beta), n.sign
            return lambda x, v: ctx.power(x, s * b(x, v)) if x != 0 else \
                (mpf(1) if b(x, v) == 0 else mpf(0))
        if isinstance(n, Delay):
            lam, sh, fn = go(n.lam), go(n.shift), _need(funcs, n.name)
            return lambda x, v: fn(lam(x, v) * x + sh(x, v))
        if isinstance(n, Compose):
            a, fn = go(n.arg), _need(funcs, n.name)
            return lambda x, v: fn(a(x, v))
        if isinstance(n, ODeriv):
            a, k = go(n.arg), n.n
            return lambda x, v: ctx.diff(lambda t: a(t, {}), x, k)
        if isinstance(n, Caputo):
            a, order = go(n.arg), go(n.order)

            def caputo(x, v):
                alpha = order(x, v)
                return caputo_value(lambda t: a(t, {}), alpha, x, ctx)
            return caputo
        if isinstance(n, Volterra):
            a, mu = go(n.arg), go(n.mu)

            def volterra(x, v):
                m = mu(x, v)
                if x == 0:
                    return mpf(0)
                return singular_quad(lambda s: a(x - s, {}), 1 - m, x, ctx)
            return volterra
        if isinstance(n, Fredholm):
            basis = go(n.basis)
            if n.weight is None:
                c = go(Param(n.param))
                return lambda x, v: c(x, v) * basis(x, v)
            w = go(n.weight)
            cache = {}

            def fred(x, v):
                if "I" not in cache:
                    cache["I"] = ctx.quad(lambda z: w(z, {}), [0, 1])
                return cache["I"] * basis(x, v)
            return fred
        raise EvalError(f"cannot evaluate node {n!r} pointwise")

    return go(node)


def _need(funcs, name):
    fn = funcs.get(name)
    if fn is None:
        raise EvalError(f"pointwise evaluation of {name}(...) needs a callable for {name!r}")
    return fn


def caputo_value(f, alpha, x, ctx):
    """Caputo derivative of ``f`` at ``x`` straight from the integral definition."""
    if alpha == 0:
        return f(x)
    n = int(ctx.ceil(alpha))
    if ctx.isint(alpha):
        return ctx.diff(f, x, n)
    if x == 0:
        return ctx.mpf(0)
    p = n - alpha
    return singular_quad(lambda s: ctx.diff(f, x - s, n), p, x, ctx) / ctx.gamma(p)


def singular_quad(g, p, x, ctx):
    """``int_0^x g(s) s^(p-1) ds`` for ``0 < p``.

    With ``s = w^(1/p)`` the weight becomes the constant ``1/p``, so the
    quadrature sees a bounded integrand (``s = x - tau`` in the callers).
    """
    inv = 1 / p
    return ctx.quad(lambda w: g(w ** inv), [0, x ** p]) * inv
