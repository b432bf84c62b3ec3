"""Gamma-family functions and the mixed-derivative tables of gamma-ratio kernels.

Values come from the backend's own mpmath context (which already carries the
guard digits).  The kernel tables are built from the Taylor coefficients of the
log of the kernel, which are all polygamma values, followed by the exponential
recursion ``E_a = (1/a) * sum_j j * l_j * E_{a-j}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .scalars import Backend, FloatBackend, RationalBackend


class DomainError(ValueError):
    pass


def _float_ctx(backend: Backend, what: str):
    if not isinstance(backend, FloatBackend):
        backend.require_float(what)
    return backend.ctx


def _is_int(v) -> bool:
    if isinstance(v, Fraction):
        return v.denominator == 1
    if isinstance(v, int):
        return True
    return False


def gamma(t, backend: Backend):
    """Gamma at ``t > 0``; exact on the rational backend only at integers."""
    if t <= 0:
        raise DomainError(f"gamma pole or negative argument {t}")
    if isinstance(backend, RationalBackend):
        t = Fraction(t)
        if t.denominator == 1:
            return Fraction(math.factorial(t.numerator - 1))
        backend.require_float(f"gamma({t})")
    return backend.ctx.gamma(backend.scalar(t))


def lngamma(t, backend: Backend):
    if t <= 0:
        raise DomainError(f"lngamma needs t > 0, got {t}")
    ctx = _float_ctx(backend, "lngamma")
    return ctx.loggamma(backend.scalar(t))


def digamma(t, backend: Backend):
    return polygamma(0, t, backend)


def polygamma(n: int, t, backend: Backend):
    """``psi^(n)(t)``; ``n = -1`` is accepted as ``lngamma``."""
    if t <= 0:
        raise DomainError(f"polygamma needs t > 0, got {t}")
    if n == -1:
        return lngamma(t, backend)
    if n < -1:
        raise DomainError(f"polygamma order {n}")
    ctx = _float_ctx(backend, "polygamma")
    return ctx.psi(n, backend.scalar(t))


def beta(a, b, backend: Backend):
    ctx = _float_ctx(backend, "beta")
    return ctx.beta(backend.scalar(a), backend.scalar(b))


def expint_ei(z, backend: Backend):
    """Exponential integral, principal value for ``z > 0``."""
    if z == 0:
        raise DomainError("Ei has a logarithmic singularity at 0")
    ctx = _float_ctx(backend, "Ei")
    return ctx.ei(backend.scalar(z))


# -- exponential recursions -----------------------------------------------------

def _exp_series(ell: list, zero, one, exp0):
    """Taylor coefficients of exp(f) from those of f (``ell[0]`` ignored)."""
    n = len(ell)
    out = [exp0] + [zero] * (n - 1)
    for a in range(1, n):
        acc = zero
        for j in range(1, a + 1):
            if ell[j] != 0:
                acc += j * ell[j] * out[a - j]
        out[a] = acc / a
    return out


def _mul_trunc(p: list, q: list, zero) -> list:
    n = len(p)
    out = [zero] * n
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j in range(n - i):
            out[i + j] += pi * q[j]
    return out


def _bivariate_exp(coef, exp00, zero):
    """``coef[i][j]``: Taylor coefficients of f(s, e); returns those of exp(f)."""
    nt = len(coef)
    na = len(coef[0])
    rows = [None] * nt
    rows[0] = _exp_series(coef[0], zero, None, exp00)
    for a in range(1, nt):
        acc = [zero] * na
        for j in range(1, a + 1):
            prod = _mul_trunc(coef[j], rows[a - j], zero)
            for b in range(na):
                acc[b] += j * prod[b]
        rows[a] = [v / a for v in acc]
    return rows


@dataclass(frozen=True)
class KernelDerivs:
    """Mixed partials ``table[a][b] = d_t^a d_alpha^b K(t, alpha)`` at ``(k, alpha0)``."""

    k: Fraction
    alpha0: object
    table: tuple

    @property
    def max_t(self) -> int:
        return len(self.table) - 1

    @property
    def max_a(self) -> int:
        return len(self.table[0]) - 1

    def __getitem__(self, idx):
        a, b = idx
        return self.table[a][b]


def _factorials(n):
    return [math.factorial(i) for i in range(n + 1)]


def _log_taylor(k, alpha0, max_t, max_a, sign, backend):
    """Taylor coefficients of ``sign * (lnG(t - alpha + 1) - lnG(t + 1))``."""
    zero = backend.scalar(0)
    coef = [[zero] * (max_a + 1) for _ in range(max_t + 1)]
    fact = _factorials(max_t + max_a + 1)
    if _is_int(alpha0) and max_a == 0:
        # finite product form: lnR = -sum_{i<n} ln(t - i)
        n = int(alpha0)
        for a in range(1, max_t + 1):
            s = sum((backend.scalar(Fraction(1)) / (backend.scalar(k) - i) ** a for i in range(n)),
                    zero)
            coef[a][0] = sign * (-1) ** a * s / a
        val = backend.scalar(1)
        for i in range(n):
            val *= backend.scalar(k) - i
        base = val if sign < 0 else 1 / val
        return coef, base
    t1 = backend.scalar(k) - backend.scalar(alpha0) + 1
    t2 = backend.scalar(k) + 1
    for a in range(max_t + 1):
        for b in range(max_a + 1):
            if a == 0 and b == 0:
                continue
            order = a + b - 1
            v = (-1) ** b * polygamma(order, t1, backend)
            if b == 0:
                v -= polygamma(order, t2, backend)
            coef[a][b] = sign * v / (fact[a] * fact[b])
    ctx = backend.ctx
    base = ctx.gamma(t1) / ctx.gamma(t2)
    if sign < 0:
        base = 1 / base
    return coef, base


@lru_cache(maxsize=4096)
def _kernel(k: Fraction, alpha0, max_t: int, max_a: int, sign: int, backend: Backend):
    if k < alpha0:
        raise DomainError(f"kernel gate violated: k = {k} < alpha = {alpha0}")
    if not (_is_int(alpha0) and max_a == 0) and isinstance(backend, RationalBackend):
        backend.require_float(f"kernel at alpha = {alpha0}")
    coef, base = _log_taylor(k, alpha0, max_t, max_a, sign, backend)
    rows = _bivariate_exp(coef, base, backend.scalar(0))
    fact = _factorials(max(max_t, max_a))
    table = tuple(tuple(rows[a][b] * fact[a] * fact[b] for b in range(max_a + 1))
                  for a in range(max_t + 1))
    return KernelDerivs(Fraction(k), alpha0, table)


def _norm_alpha(alpha0):
    if isinstance(alpha0, int):
        return Fraction(alpha0)
    return alpha0


def gamma_ratio_derivs(k, alpha0, max_t: int, max_a: int, backend: Backend) -> KernelDerivs:
    """Partials of ``R(t, alpha) = G(t - alpha + 1) / G(t + 1)`` (the inverse kernel)."""
    return _kernel(Fraction(k), _norm_alpha(alpha0), max_t, max_a, 1, backend)


def reciprocal_ratio_derivs(k, alpha0, max_t: int, max_a: int, backend: Backend) -> KernelDerivs:
    """Partials of ``Q = 1/R = G(t + 1) / G(t - alpha + 1)`` (the Caputo power rule)."""
    return _kernel(Fraction(k), _norm_alpha(alpha0), max_t, max_a, -1, backend)


@lru_cache(maxsize=4096)
def beta_derivs(a, mu, max_d: int, backend: Backend) -> tuple:
    """``d_a^j B(a + 1, 1 - mu)`` for ``j = 0..max_d``."""
    if not 0 < mu < 1:
        raise DomainError(f"mu must lie in (0, 1), got {mu}")
    if a <= -1:
        raise DomainError(f"beta integral diverges for a = {a}")
    _float_ctx(backend, "beta derivatives")
    ctx = backend.ctx
    a_ = backend.scalar(a)
    m_ = backend.scalar(mu)
    zero = backend.scalar(0)
    ell = [zero]
    for j in range(1, max_d + 1):
        v = polygamma(j - 1, a_ + 1, backend) - polygamma(j - 1, a_ + 2 - m_, backend)
        ell.append(v / math.factorial(j))
    b0 = ctx.gamma(a_ + 1) * ctx.gamma(1 - m_) / ctx.gamma(a_ + 2 - m_)
    coeffs = _exp_series(ell, zero, None, b0)
    return tuple(c * math.factorial(j) for j, c in enumerate(coeffs))


def gamma_series_coeffs(beta0, depth: int, backend: Backend, reciprocal: bool = False) -> list:
    """Taylor coefficients of ``G(beta0 + d)`` (or ``1/G``) in ``d``."""
    if beta0 <= 0:
        raise DomainError(f"gamma expansion needs a positive centre, got {beta0}")
    zero = backend.scalar(0)
    sign = -1 if reciprocal else 1
    if depth == 0 and isinstance(backend, RationalBackend):
        g = gamma(beta0, backend)
        return [1 / g if reciprocal else g]
    ell = [zero]
    for j in range(1, depth + 1):
        ell.append(sign * polygamma(j - 1, beta0, backend) / math.factorial(j))
    g = gamma(beta0, backend)
    return _exp_series(ell, zero, None, 1 / g if reciprocal else g)


def clear_caches():
    _kernel.cache_clear()
    beta_derivs.cache_clear()
