"""Closed forms for Cauchy-Euler equations ``sum a_j x^j y^(j) = F``.

With ``y(x) = int_0^inf f(t) x^t dt`` each ``x^j d^j/dx^j`` acts on ``x^t`` as
the falling factorial ``t (t-1) ... (t-j+1)``, so the equation becomes
``P(t) f(t) = phi(t)`` where ``phi`` is the t-image of the forcing
(``t^n`` is the image of ``n! / (-ln x)^(n+1)``).
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import mpmath
import sympy

T = sympy.Symbol("t")


class EulerError(ValueError):
    pass


@dataclass
class EulerSolution:
    f: sympy.Expr            # rational function of T
    poly: list               # (n, c): polynomial part sum c t^n of f
    poles: list              # (r, A): simple poles A / (t - r), r real
    coeffs: tuple
    forcing: sympy.Expr

    def __call__(self, x, ctx=mpmath.mp):
        """``y(x)`` for ``0 < x < 1``."""
        x = ctx.mpf(x)
        if not 0 < x < 1:
            raise EulerError("y(x) is available for 0 < x < 1")
        lx = ctx.ln(x)
        s = -lx
        total = ctx.mpf(0)
        for n, c in self.poly:
            total += _num(c, ctx) * ctx.factorial(n) / s ** (n + 1)
        for r, a in self.poles:
            r = _num(r, ctx)
            # principal value of int_0^inf x^t / (t - r) dt
            total += _num(a, ctx) * ctx.power(x, r) * (-ctx.ei(-r * lx))
        return total

    def forcing_value(self, x, ctx=mpmath.mp):
        s = -ctx.ln(ctx.mpf(x))
        p = sympy.Poly(self.forcing, T)
        return sum(_num(c, ctx) * ctx.factorial(n) / s ** (n + 1)
                   for (n,), c in p.terms())

    def residual(self, x, ctx=mpmath.mp):
        """Left side minus forcing at ``x`` with numerically differentiated ``y``."""
        x = ctx.mpf(x)
        total = ctx.mpf(0)
        for j, a in enumerate(self.coeffs):
            if a:
                d = self(x, ctx) if j == 0 else ctx.diff(lambda z: self(z, ctx), x, j)
                total += _num(a, ctx) * x ** j * d
        return total - self.forcing_value(x, ctx)


def _num(v, ctx):
    v = sympy.nsimplify(v) if not isinstance(v, sympy.Basic) else v
    return ctx.mpf(sympy.N(v, ctx.dps + 10))


def characteristic(coeffs) -> sympy.Expr:
    """``sum a_j t (t-1) ... (t-j+1)``."""
    return sympy.expand(sum(sympy.Rational(a) * sympy.ff(T, j)
                            for j, a in enumerate(coeffs)))


def euler_operator_solve(coeffs, forcing) -> EulerSolution:
    """Solve ``sum coeffs[j] x^j y^(j) = F`` where ``forcing`` is the t-image of ``F``.

    ``forcing`` is a polynomial in ``T`` (sympy expression) or a mapping
    ``{n: c}`` standing for ``sum c t^n``.
    """
    coeffs = tuple(Fraction(a) for a in coeffs)
    if not any(coeffs):
        raise EulerError("all operator coefficients vanish")
    if isinstance(forcing, dict):
        forcing = sum(sympy.Rational(c) * T ** n for n, c in forcing.items())
    forcing = sympy.expand(sympy.sympify(forcing))
    if not forcing.is_polynomial(T):
        raise EulerError("forcing image must be a polynomial in t")
    q = characteristic([sympy.Rational(a.numerator, a.denominator) for a in coeffs])
    f = sympy.cancel(forcing / q)
    if forcing == 0:
        return EulerSolution(sympy.Integer(0), [], [], coeffs, forcing)
    num, den = sympy.fraction(f)
    quo, rem = sympy.div(sympy.Poly(num, T), sympy.Poly(den, T))
    poly = [(n, c) for (n,), c in quo.terms()]
    poles = []
    dpoly = sympy.Poly(den, T)
    if dpoly.degree() > 0:
        roots = sympy.roots(dpoly)
        if sum(roots.values()) != dpoly.degree():
            raise EulerError("could not find all roots of the characteristic polynomial")
        dd = dpoly.diff(T)
        for r, mult in roots.items():
            if mult > 1:
                raise EulerError(f"repeated root {r} is not supported")
            if not r.is_real:
                raise EulerError(f"complex root {r} is not supported")
            poles.append((r, sympy.simplify(rem.as_expr().subs(T, r) / dd.as_expr().subs(T, r))))
        poles.sort(key=lambda ra: float(ra[0]))
    return EulerSolution(f, poly, poles, coeffs, forcing)
