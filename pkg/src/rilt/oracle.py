"""Independent references: RK4, quadrature Caputo values, exact solutions, scoring."""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import sympy

from .engine import Trajectory
from .evaluate import caputo_value, compile_point
from .expr import Num
from .problem import ProblemSpec


class OracleError(RuntimeError):
    pass


def _ctx(precision: int):
    ctx = mpmath.MPContext()
    ctx.dps = precision
    return ctx


def _mp(ctx, v):
    if isinstance(v, Fraction):
        return ctx.mpf(v.numerator) / v.denominator
    if isinstance(v, str):
        return _mp(ctx, Fraction(v))
    return ctx.mpf(v)


@dataclass
class OracleProblem:
    """First-order system ``u_i' = F_i(x, u)`` with an optional exact solution."""

    names: tuple
    rhs: Callable            # rhs(x, state list) -> list
    initial: list
    exact: Callable | None = None    # exact(x) -> list
    grid: list = field(default_factory=list)
    ctx: object = None

    @property
    def dimension(self) -> int:
        return len(self.names)


def oracle_from_problem(problem: ProblemSpec, precision: int = 30, exact=None, grid=None,
                        params=None) -> OracleProblem:
    """Build the derivative callable from a problem's natural-form right sides."""
    if params:
        problem = problem.with_bindings(params)
    problem = problem.bound()
    ctx = _ctx(precision)
    names = problem.unknowns
    fns = []
    for u in names:
        if problem.orders[u] != Num(Fraction(1)) or u not in problem.natural:
            raise OracleError("RK4 oracle needs a first-order system D(u, 1) = f")
        fns.append(compile_point(problem.natural[u], ctx, {}))
    init = []
    for u in names:
        init.append(compile_point(problem.ics[u][0], ctx, {})(ctx.mpf(0), {}))

    def rhs(x, state):
        vals = dict(zip(names, state))
        return [f(x, vals) for f in fns]

    return OracleProblem(names, rhs, init, exact, grid or [], ctx)


def rk4_integrate(problem: OracleProblem, h, T) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta."""
    ctx = problem.ctx or _ctx(30)
    h, T = _mp(ctx, h), _mp(ctx, T)
    if not h > 0:
        raise OracleError("step must be positive")
    n = int(ctx.nint(T / h))
    y = [ctx.mpf(v) for v in problem.initial]
    f = problem.rhs
    times, states = [ctx.mpf(0)], [list(y)]
    half = h / 2
    for i in range(n):
        x = h * i
        k1 = f(x, y)
        k2 = f(x + half, [a + half * b for a, b in zip(y, k1)])
        k3 = f(x + half, [a + half * b for a, b in zip(y, k2)])
        k4 = f(x + h, [a + h * b for a, b in zip(y, k3)])
        y = [a + h / 6 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4)]
        if not all(ctx.isfinite(v) for v in y):
            raise OracleError(f"non-finite state after t = {x}")
        times.append(h * (i + 1))
        states.append(list(y))
    return Trajectory(problem.names, times, states, h)


def caputo_quadrature(expr, alpha, x, precision: int = 30):
    """Caputo derivative of ``expr`` (sympy, in ``x``) by quadrature.

    The n-th derivative is formed symbolically; tanh-sinh quadrature copes
    with the endpoint singularity of ``(x - tau)^(n - alpha - 1)``.
    """
    ctx = _ctx(precision)
    xs = sympy.Symbol("x")
    expr = sympy.sympify(expr)
    alpha = _mp(ctx, alpha)
    if alpha <= 0 or ctx.isint(alpha):
        raise OracleError("alpha must be positive and non-integer")
    n = int(ctx.ceil(alpha))
    dn = sympy.lambdify(xs, sympy.diff(expr, xs, n), modules=[ctx, "mpmath"])
    x = _mp(ctx, x)
    if x == 0:
        return ctx.mpf(0)
    p = n - alpha
    inv = 1 / p
    val, err = ctx.quad(lambda w: dn(x - w ** inv), [0, x ** p], error=True)
    val, err = val * inv, err * inv
    if err > ctx.mpf(10) ** -12 * max(1, abs(val)):
        raise OracleError(f"quadrature did not converge (error estimate {err})")
    return val / ctx.gamma(p)


@dataclass
class ErrorReport:
    grid: list
    errors: list
    wall_time: float = 0.0

    @property
    def max_error(self):
        return max(self.errors) if self.errors else 0


def score(candidate, reference, grid) -> ErrorReport:
    """Pointwise absolute errors of callables ``candidate`` and ``reference``.

    Both return a scalar or a sequence of components; for sequences the
    largest component error counts.
    """
    t0 = time.perf_counter()
    errs = []
    for x in grid:
        a, b = candidate(x), reference(x)
        if isinstance(a, (list, tuple)) or isinstance(b, (list, tuple)):
            if len(a) != len(b):
                raise OracleError("dimension mismatch")
            errs.append(max(abs(p - q) for p, q in zip(a, b)))
        else:
            errs.append(abs(a - b))
    return ErrorReport(list(grid), errs, time.perf_counter() - t0)


def trajectory_function(traj: Trajectory):
    lookup = {round(float(t), 9): st for t, st in zip(traj.times, traj.states)}

    def at(t):
        try:
            return lookup[round(float(t), 9)]
        except KeyError:
            raise OracleError(f"no trajectory sample at t = {t}") from None
    return at


# -- exact solutions ------------------------------------------------------------

@dataclass
class ExactEntry:
    name: str
    problem: str                 # bundled problem file stem
    params: dict
    solution: Callable           # solution(ctx, x) -> value
    domain: tuple = (0, 1)


EXACT: dict = {}


def _register(entry: ExactEntry, check: bool = False):
    if check:
        self_check(entry)
    EXACT[entry.name] = entry
    return entry


def self_check(entry: ExactEntry, points: int = 5, seed: int = 0, precision: int = 20,
               tol=1e-8):
    """Pointwise residual of the natural-form equation at random points."""
    from .problem import load_bundled
    problem = load_bundled(entry.problem).with_bindings(entry.params).bound()
    ctx = _ctx(precision)
    (u,) = problem.unknowns
    sol = lambda x: entry.solution(ctx, x)
    rhs = compile_point(problem.natural[u], ctx, {}, {u: sol})
    order = compile_point(problem.orders[u], ctx, {})
    rng = random.Random(seed)
    lo, hi = entry.domain
    worst = ctx.mpf(0)
    for _ in range(points):
        lo_, hi_ = _mp(ctx, lo), _mp(ctx, hi)
        x = lo_ + (hi_ - lo_) * ctx.mpf(rng.uniform(0.05, 0.95))
        lhs = caputo_value(sol, order(x, {}), x, ctx)
        r = abs(lhs - rhs(x, {u: sol(x)}))
        worst = max(worst, r)
    if worst > tol:
        raise OracleError(f"exact solution {entry.name} fails its self-check (residual {worst})")
    return worst


def _entries():
    def tan_c(c):
        return lambda ctx, x: ctx.tan(x + ctx.atan(_mp(ctx, c)))
    out = [
        ExactEntry("riccati", "riccati", {"c": Fraction(0)}, tan_c(0), (0, Fraction(1, 2))),
        ExactEntry("riccati_c", "riccati", {"c": Fraction(1, 2)}, tan_c(Fraction(1, 2)),
                   (0, Fraction(1, 2))),
        ExactEntry("logpower", "logpower", {"c": Fraction(1)},
                   lambda ctx, x: ctx.power(x, ctx.sin(x)) if x else ctx.mpf(1)),
        ExactEntry("frac_riccati", "frac_riccati", {"alpha": Fraction(1), "x0": Fraction(0)},
                   lambda ctx, x: ctx.tanh(x)),
        ExactEntry("loggrowth", "loggrowth", {}, lambda ctx, x: ctx.log1p(x)),
        ExactEntry("volterra", "volterra", {}, lambda ctx, x: x ** 3),
        ExactEntry("fredholm", "fredholm", {}, lambda ctx, x: x ** 3),
        ExactEntry("varorder", "varorder", {}, lambda ctx, x: x ** 3),
        ExactEntry("delay_varorder", "delay_varorder", {}, lambda ctx, x: x ** 2 + 4 * x + 4),
        ExactEntry("nonlinear_delay", "nonlinear_delay", {}, lambda ctx, x: x ** 4 - 5 * x + 2),
    ]
    for rho in (Fraction(1, 2), Fraction(4, 5), Fraction(1)):
        out.append(ExactEntry(f"prop_delay_{rho}", "prop_delay", {"rho": rho},
                              (lambda r: lambda ctx, x: _mp(ctx, r) * x ** 2 + 1)(rho)))
    return out


def exact_registry(check: bool = True) -> dict:
    """All exact solutions; with ``check`` each one passes its self-check first."""
    if not EXACT or check:
        EXACT.clear()
        for e in _entries():
            _register(e, check)
    return dict(EXACT)
