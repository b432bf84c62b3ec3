"""The fixed-point recursion ``u_{j+1} = ic + K[A(u_j)]`` and everything around it.

A solve runs on a :class:`Setup`: the problem with bound parameters, the
scalar backend, resolved orders and the series evaluator.  Iterates are kept
at the working cap ``N + headroom`` so that factors with negative offsets
(``x^(sin x - 1)`` before normalisation, say) do not eat into the first ``N``
powers; stabilisation and residuals only look at powers ``<= N``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import series as S
from .evaluate import EvalError, SeriesEvaluator
from .expr import Add, Fredholm, Num, X, replace_x, walk
from .operators import caputo_standard, rilt_kernel_apply
from .problem import ProblemSpec
from .scalars import (Backend, BackendError, FloatBackend, ParamScalar, ParameterError,
                      RationalBackend, make_backend)
from .series import Series, SeriesError

log = logging.getLogger(__name__)

CONDITION_FACTOR = 1000


class SolveError(RuntimeError):
    pass


@dataclass
class Setup:
    problem: ProblemSpec
    backend: Backend
    cap: Fraction
    work_cap: Fraction
    log_cap: int
    names: tuple
    orders: dict
    ic: dict
    evaluator: SeriesEvaluator
    tolerance: object
    max_iterations: int
    lattice: int

    def fresh_evaluator(self, project=None, param_values=None) -> SeriesEvaluator:
        ev = self.evaluator
        return SeriesEvaluator(self.backend, self.work_cap, self.log_cap, self.names,
                               self.problem.domain[1],
                               ev.project if project is None else project,
                               param_values)


@dataclass
class ConvergenceEstimate:
    levels: list
    errors: list
    ratio: object = None
    M: object = None
    beta: object = None
    x: object = None
    saturated: bool = False

    def tail_bound(self, n: int):
        if self.saturated or self.M is None:
            return 0.0
        return self.M * self.ratio ** n


@dataclass
class SolveReport:
    solution: dict
    iterations: int
    residual_max: object
    wall_time: float
    backend: str
    cap: Fraction
    lattice: int
    parameters: dict = field(default_factory=dict)
    roots: list = field(default_factory=list)
    presolution: dict | None = None
    projected: object = 0
    convergence: ConvergenceEstimate | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        be = self.backend
        fmt = lambda v: str(v)
        return {
            "iterations": self.iterations,
            "residual_max": fmt(self.residual_max),
            "wall_time": round(self.wall_time, 6),
            "backend": be,
            "order": str(self.cap),
            "lattice": self.lattice,
            "parameters": {k: fmt(v) for k, v in self.parameters.items()},
            "roots": [{k: fmt(v) for k, v in r.items()} for r in self.roots],
            "notes": list(self.notes),
        }


# -- setup -------------------------------------------------------------------------

def _needs_float(problem: ProblemSpec) -> bool:
    from .expr import Caputo, Func, NamedConst, Volterra
    for node in list(problem.rhs.values()) + list(problem.orders.values()):
        for n in walk(node):
            if isinstance(n, (NamedConst, Volterra, Caputo)):
                return True
            if isinstance(n, Func) and n.name in ("gamma", "rgamma"):
                return True
    return False


def prepare(problem: ProblemSpec, *, order=None, precision=None, backend=None,
            params: dict | None = None, max_iterations=None, project=True) -> Setup:
    """Bind parameters, choose the backend, resolve orders and seed series."""
    if params:
        problem = problem.with_bindings(params)
    problem = problem.bound()
    cap = Fraction(order if order is not None else problem.order)
    if cap <= 0:
        raise SolveError("truncation order must be positive")
    precision = precision or problem.precision
    kind = backend or problem.backend
    probe = SeriesEvaluator(FloatBackend(30), 1, names=problem.params,
                            domain_end=problem.domain[1])
    alpha0 = {}
    for u in problem.unknowns:
        try:
            s = probe.value(problem.orders[u], {})
        except EvalError as exc:
            raise SolveError(f"order of {u}: {exc}") from exc
        alpha0[u] = S.split_constant(s)[0]
    if kind is None:
        integral = all(a.denominator == 1 for a in alpha0.values()) and all(
            not (isinstance(problem.orders[u], Num) is False and _varies(probe, problem.orders[u]))
            for u in problem.unknowns)
        kind = "rational" if integral and not _needs_float(problem) else "float"
    be = make_backend(kind, precision)
    headroom = problem.headroom
    if headroom is None:
        headroom = Fraction(math.ceil(max(alpha0.values(), default=0)))
    work_cap = cap + headroom
    log_cap = problem.log_cap if problem.log_cap is not None else math.ceil(work_cap)
    names = problem.params
    ev = SeriesEvaluator(be, work_cap, log_cap, names, problem.domain[1], project)
    orders = {}
    for u in problem.unknowns:
        try:
            orders[u] = ev.order_of(problem.orders[u])
        except (EvalError, SeriesError, BackendError) as exc:
            raise SolveError(f"order of {u}: {exc}") from exc
        if len(problem.ics[u]) != orders[u].ic_count:
            raise SolveError(f"{u}: order {orders[u].alpha0} needs {orders[u].ic_count} "
                             f"initial condition(s), got {len(problem.ics[u])}")
    ic = {}
    for u in problem.unknowns:
        ic[u] = ic_series_from(problem.ics[u], ev)
    tol = be.tolerance
    max_it = max_iterations or problem.max_iterations or 4 * math.ceil(cap) + 8
    return Setup(problem, be, cap, work_cap, log_cap, names, orders, ic, ev, tol, max_it,
                 _lattice(problem, orders, ev))


def _varies(probe: SeriesEvaluator, node) -> bool:
    s = probe.value(node, {})
    return any(k != (0, 0) for k in s._terms)


def _lattice(problem: ProblemSpec, orders: dict, ev: SeriesEvaluator) -> int:
    from .expr import Volterra, XPow
    dens = [o.alpha0.denominator for o in orders.values()]
    for node in problem.rhs.values():
        for n in walk(node):
            if isinstance(n, Volterra) and isinstance(n.mu, Num):
                dens.append(n.mu.value.denominator)
            if isinstance(n, XPow):
                try:
                    b0 = S.split_constant(ev.value(n.beta, {}))[0]
                    dens.append(b0.denominator)
                except (EvalError, SeriesError, BackendError):
                    pass
    out = 1
    for d in dens:
        out = out * d // math.gcd(out, d)
    return out


def ic_series_from(ics: list, ev: SeriesEvaluator) -> Series:
    total = ev.zero()
    for k, node in enumerate(ics):
        c = ev.value(node, {})
        if any(key != (0, 0) for key in c._terms):
            raise SolveError("initial conditions must not depend on x")
        if k > ev.power_cap:
            break
        term = S.shift(c, k) if k else c
        total = S.add(total, S.scale(term, ev.backend.scalar(Fraction(1, math.factorial(k)))))
    return total


def ic_series(setup: Setup, unknown: str) -> Series:
    """``sum_k c_k x^k / k!`` for one unknown."""
    return setup.ic[unknown]


# -- iteration ---------------------------------------------------------------------

def eval_rhs(setup: Setup, unknown: str, current: dict, evaluator=None) -> Series:
    ev = evaluator or setup.evaluator
    return ev.value(setup.problem.rhs[unknown], current)


def iterate_once(setup: Setup, current: dict, evaluator=None) -> dict:
    out = {}
    for u in setup.problem.unknowns:
        a = eval_rhs(setup, u, current, evaluator)
        order = setup.orders[u]
        try:
            k = rilt_kernel_apply(a, order, order.ic_count)
        except SeriesError as exc:
            raise SolveError(f"kernel for {u}: {exc}") from exc
        out[u] = S.add(setup.ic[u], k)
    return out


def _diff_mag(a: Series, b: Series, cap) -> tuple:
    """Largest coefficient change among powers <= cap, and the lowest moving power."""
    worst, lowest = 0, None
    keys = set(a._terms) | set(b._terms)
    zero = ParamScalar.const(0)
    for key in keys:
        if key[0] > cap:
            continue
        ca, cb = a._terms.get(key, zero), b._terms.get(key, zero)
        if ca == cb:
            continue
        d = (ca - cb).magnitude()
        scale = max(1, ca.magnitude(), cb.magnitude())
        rel = d / scale
        if rel > worst:
            worst = rel
        if lowest is None or key[0] < lowest:
            lowest = key[0]
    return worst, lowest


def _stable(setup: Setup, old: dict, new: dict):
    tol = setup.tolerance
    lowest = None
    for u in setup.problem.unknowns:
        worst, low = _diff_mag(old[u], new[u], setup.cap)
        if worst > tol:
            if lowest is None or low < lowest:
                lowest = low
    return lowest


def run_iterations(setup: Setup, start: dict | None = None, evaluator=None):
    current = dict(start or setup.ic)
    for j in range(1, setup.max_iterations + 1):
        nxt = iterate_once(setup, current, evaluator)
        moving = _stable(setup, current, nxt)
        current = nxt
        if moving is None:
            return current, j
    moving = _stable(setup, current, iterate_once(setup, current, evaluator))
    raise SolveError(f"no stabilisation within {setup.max_iterations} iterations; "
                     f"lowest moving power x^{moving}")


def truncate(sol: dict, cap) -> dict:
    return {u: s.with_caps(cap) for u, s in sol.items()}


def clean(setup: Setup, sol: dict, factor=1) -> dict:
    """Drop float coefficients below ``factor`` times the backend tolerance."""
    if setup.backend.exact:
        return sol
    tol = setup.tolerance * factor
    out = {}
    for u, s in sol.items():
        out[u] = s.map_coeffs(lambda c: c.map_coeffs(lambda v: v if abs(v) > tol else 0))
    return out


def _with_backend(setup: Setup, kind: str) -> Setup:
    return prepare(setup.problem, order=setup.cap, precision=setup.problem.precision,
                   backend=kind, max_iterations=setup.max_iterations,
                   project=setup.evaluator.project)


def solve(problem_or_setup, **kw) -> SolveReport:
    """Iterate to stabilisation, resolve constants, then verify the residual."""
    t0 = time.perf_counter()
    setup = problem_or_setup if isinstance(problem_or_setup, Setup) else prepare(problem_or_setup, **kw)
    notes = []
    try:
        sol, iters = run_iterations(setup)
    except (EvalError, BackendError) as exc:
        if isinstance(setup.backend, RationalBackend) and _is_backend_issue(exc):
            notes.append(f"rational backend unavailable ({exc}); switched to float")
            setup = _with_backend(setup, "float")
            sol, iters = run_iterations(setup)
        else:
            raise SolveError(str(exc)) from exc
    projected = setup.evaluator.projected_mass
    full = sol
    sol = truncate(sol, setup.cap)
    pre = None
    params: dict = {}
    roots: list = []
    if _resolvable(setup):
        pre = sol
        roots = resolve_parameters(setup, full)
        if not roots:
            raise SolveError("no admissible value for the free constants")
        params = roots[0]
        sol = clean(setup, bind_solution(sol, params, setup.backend), CONDITION_FACTOR)
        full = bind_solution(full, params, setup.backend)
    sol = clean(setup, sol)
    res = residual(setup, full, params)
    rmax = residual_max(res, setup.cap)
    if projected and setup.problem.constraints == [] and not _resolvable(setup):
        if any(not s.is_polynomial() for s in clean(setup, sol).values()):
            notes.append(f"delay/composition used the polynomial part; discarded up to {projected}")
    return SolveReport(sol, iters, rmax, time.perf_counter() - t0, setup.backend.name,
                       setup.cap, setup.lattice, params, roots, pre, projected, None, notes)


def _is_backend_issue(exc) -> bool:
    cause = exc
    while cause is not None:
        if isinstance(cause, BackendError):
            return True
        cause = cause.__cause__
    return isinstance(exc, BackendError) or "backend" in str(exc)


# -- parameters --------------------------------------------------------------------

def _fredholm_nodes(setup: Setup):
    out = []
    for node in setup.problem.rhs.values():
        for n in walk(node):
            if isinstance(n, Fredholm) and n.weight is not None:
                out.append(n)
    return out


def _resolvable(setup: Setup) -> bool:
    return bool(_fredholm_nodes(setup) or setup.problem.constraints)


def bind_solution(sol: dict, values: dict, backend: Backend) -> dict:
    vals = {k: backend.scalar(v) for k, v in values.items()}
    return {u: s.bind(vals) for u, s in sol.items()}


def _equations(setup: Setup, sol: dict) -> list:
    """Polynomial equations (ParamScalar == 0) in the free constants."""
    ev = setup.fresh_evaluator()
    eqs = []
    be = setup.backend
    for node in _fredholm_nodes(setup):
        w = ev.value(node.weight, sol)
        integral = S.evaluate_symbolic(S.antideriv(w.with_caps(setup.cap)), 1)
        p = ParamScalar.param(node.param, setup.names, be.scalar(1))
        eqs.append(("fredholm " + node.param, p - integral))
    for c in setup.problem.constraints:
        s = sol[c.unknown].with_caps(setup.cap)
        val = ev.value(c.value, {})
        target = val.coefficient(0, 0)
        eqs.append((c.text or f"{c.unknown}({c.at})", S.evaluate_symbolic(s, c.at) - target))
    return eqs


def _real_roots(coeffs: list, backend: Backend) -> list:
    """Real roots of ``sum coeffs[i] t^i``."""
    while coeffs and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    deg = len(coeffs) - 1
    if deg < 1:
        return []
    if deg == 1:
        return [-coeffs[0] / coeffs[1]]
    if deg == 2:
        c, b, a = coeffs
        disc = b * b - 4 * a * c
        if disc < 0:
            return []
        if isinstance(backend, RationalBackend):
            num, den = Fraction(disc).numerator, Fraction(disc).denominator
            rn, rd = math.isqrt(num), math.isqrt(den)
            if rn * rn == num and rd * rd == den:
                sq = Fraction(rn, rd)
                return sorted({(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
            backend = FloatBackend(50)
            a, b, disc = backend.scalar(a), backend.scalar(b), backend.scalar(disc)
        sq = backend.ctx.sqrt(disc)
        return sorted({(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
    fb = backend if isinstance(backend, FloatBackend) else FloatBackend(50)
    ctx = fb.ctx
    cs = [fb.scalar(c) for c in reversed(coeffs)]
    roots = ctx.polyroots(cs, maxsteps=400, extraprec=4 * ctx.prec)
    out = []
    for r in roots:
        if isinstance(r, type(ctx.mpc(0))):
            if abs(r.imag) > fb.tolerance * max(1, abs(r)):
                continue
            r = r.real
        out.append(ctx.mpf(r))
    if isinstance(backend, RationalBackend):
        exact = []
        for r in out:
            q = Fraction(str(r)).limit_denominator(10**12)
            if sum(c * q ** i for i, c in enumerate(coeffs)) == 0:
                exact.append(q)
            else:
                raise BackendError(f"irrational root {r} on the rational backend")
        return sorted(set(exact))
    return sorted(out)


def resolve_parameters(setup: Setup, sol: dict) -> list:
    """Admissible values of the free constants, best first.

    Roots come from the first equation; a root is admissible when every
    equation and every residual coefficient up to ``N`` vanishes at it.
    Admissible roots are ranked by the residual just above ``N``.
    """
    eqs = _equations(setup, sol)
    if not eqs:
        return []
    free = set()
    for _, e in eqs:
        free |= e.free_names()
    if len(free) != 1:
        raise SolveError(f"parameter resolution handles one constant at a time, found {sorted(free) or 'none'}")
    name = free.pop()
    be = setup.backend
    label, first = min(eqs, key=lambda e: len(e[1].univariate(name)))
    try:
        coeffs = first.univariate(name)
    except ParameterError as exc:
        raise SolveError(f"{label}: {exc}") from exc
    candidates = _real_roots(coeffs, be)
    tol = setup.tolerance * CONDITION_FACTOR
    scored = []
    for r in candidates:
        vals = {name: r}
        if any(abs(e.evaluate(vals, be.scalar(0))) > tol * max(1, abs(r)) for _, e in eqs):
            continue
        bound = bind_solution(sol, vals, be)
        if any(c.at >= setup.problem.domain[1] and
               not clean(setup, truncate(bound, setup.cap), CONDITION_FACTOR)[c.unknown].is_polynomial()
               for c in setup.problem.constraints):
            continue
        try:
            res = residual(setup, bound, vals, upto=setup.work_cap)
        except (EvalError, SeriesError) as exc:
            log.debug("root %s rejected: %s", r, exc)
            continue
        inner = residual_max(res, setup.cap)
        if inner > tol:
            continue
        tail = residual_max(res, setup.work_cap)
        scored.append((tail, r))
    scored.sort(key=lambda tr: tr[0])
    return [{name: r} for _, r in scored]


# -- residual ---------------------------------------------------------------------

def residual(setup: Setup, sol: dict, params: dict | None = None, upto=None) -> dict:
    """``x^alpha D^alpha u - A(u, x)`` per unknown, truncated at ``upto`` (default N)."""
    upto = setup.cap if upto is None else upto
    strict = setup.fresh_evaluator(project=False, param_values=params or {})
    sol = clean(setup, sol)
    out = {}
    for u in setup.problem.unknowns:
        try:
            a = strict.value(setup.problem.rhs[u], sol)
        except EvalError:
            loose = setup.fresh_evaluator(project=True, param_values=params or {})
            a = loose.value(setup.problem.rhs[u], sol)
        lhs = caputo_standard(sol[u].with_caps(setup.work_cap), setup.orders[u])
        out[u] = S.add(lhs, -a).with_caps(upto)
    return out


def residual_max(res: dict, cap) -> object:
    best = 0
    for s in res.values():
        for (p, _), c in s._terms.items():
            if p <= cap:
                m = c.magnitude()
                if m > best:
                    best = m
    return best


# -- stepping -----------------------------------------------------------------------

@dataclass
class Trajectory:
    names: tuple
    times: list
    states: list
    dt: object = None
    order: object = None

    def at(self, t):
        for tt, st in zip(self.times, self.states):
            if abs(tt - t) < 1e-12:
                return st
        raise KeyError(t)

    def rows(self):
        for t, st in zip(self.times, self.states):
            yield [t] + list(st)


def step_solve(problem: ProblemSpec, dt, until, *, order=None, precision=None,
               params=None, tail_tol=None) -> Trajectory:
    """Chain local series solves on ``[0, dt]`` with re-centred ``x``."""
    if params:
        problem = problem.with_bindings(params)
    problem = problem.bound()
    be = FloatBackend(precision or problem.precision)
    dt = be.scalar(Fraction(str(dt)) if isinstance(dt, (float, str)) else dt)
    until = be.scalar(Fraction(str(until)) if isinstance(until, (float, str)) else until)
    if not dt > 0:
        raise SolveError("step size must be positive")
    for u in problem.unknowns:
        if problem.orders[u] != Num(Fraction(1)):
            raise SolveError("stepping needs a first-order system")
        if u not in problem.natural:
            raise SolveError("stepping needs equations in the form D(u, 1) = f")
    cap = Fraction(order if order is not None else problem.order)
    tail_tol = be.scalar(tail_tol) if tail_tol is not None else be.ctx.mpf(10) ** (-min(12, be.precision // 2))
    state = []
    for u in problem.unknowns:
        ev = SeriesEvaluator(be, 1, names=())
        c = ev.value(problem.ics[u][0], {})
        state.append(c.coefficient(0, 0).constant_value(be.scalar(0)))
    nsteps = int(be.ctx.nint(until / dt))
    times, states = [be.scalar(0)], [list(state)]
    autonomous = not any(isinstance(n, X) for u in problem.unknowns for n in walk(problem.natural[u]))
    t = be.scalar(0)
    local_rhs = {u: problem.rhs[u] for u in problem.unknowns}
    for step in range(nsteps):
        if not autonomous:
            shifted = Add((X(), Num(Fraction(str(t)))))
            local_rhs = {u: _recentre(problem, u, shifted) for u in problem.unknowns}
        local = _local_problem(problem, local_rhs, state)
        setup = prepare(local, order=cap, precision=be.precision, backend="float",
                        project=False)
        setup.backend = be
        setup.evaluator.backend = be
        setup.ic = {u: S.constant(v, setup.work_cap, setup.log_cap, be)
                    for u, v in zip(problem.unknowns, state)}
        sol, _ = run_iterations(setup)
        new_state = []
        for u in problem.unknowns:
            s = sol[u].with_caps(cap)
            top = max(s._terms, key=lambda k: k[0], default=None)
            if top is not None and top[0] > 1:
                mag = s._terms[top].magnitude() * dt ** top[0]
                if mag > tail_tol:
                    raise SolveError(f"local series for {u} not converged at t = {t}: "
                                     f"last term {mag} exceeds {tail_tol}")
            new_state.append(S.evaluate(s, dt))
        state = new_state
        t = dt * (step + 1)
        times.append(t)
        states.append(list(state))
    return Trajectory(problem.unknowns, times, states, dt, cap)


def _recentre(problem: ProblemSpec, u: str, shifted):
    from .expr import Mul, XPow
    right = replace_x(problem.natural[u], shifted)
    return Mul((XPow(problem.orders[u], 1), right))


def _local_problem(problem: ProblemSpec, rhs: dict, state) -> ProblemSpec:
    from .problem import _replace
    return _replace(problem, rhs=rhs, ics={u: [Num(Fraction(0))] for u in problem.unknowns},
                    constraints=[], headroom=Fraction(0))


# -- convergence ----------------------------------------------------------------------

def convergence_probe(problem: ProblemSpec, x_star, levels: list, reference=None,
                      floor=None, **kw) -> ConvergenceEstimate:
    """Least-squares fit of ``log10 |u(x*) - u_N(x*)|`` against ``N``.

    ``reference`` is the exact value at ``x*`` (or a callable of the backend);
    without it the solve at the largest level serves as the reference.
    """
    levels = sorted(levels)
    if len(levels) < 4:
        raise SolveError("convergence probe needs at least four truncation levels")
    unknown = problem.unknowns[0]
    values = []
    be = None
    for n in levels:
        rep = solve(problem, order=n, **kw)
        be = make_backend(rep.backend, kw.get("precision") or problem.precision)
        values.append(S.evaluate(rep.solution[unknown].bind({}), x_star))
    ctx = (be if isinstance(be, FloatBackend) else FloatBackend(50)).ctx
    if callable(reference):
        ref = reference(ctx)
    elif reference is not None:
        ref = ctx.mpf(reference) if not isinstance(reference, Fraction) else \
            ctx.mpf(reference.numerator) / reference.denominator
    else:
        ref = ctx.mpf(values[-1]) if not isinstance(values[-1], Fraction) else \
            ctx.mpf(values[-1].numerator) / values[-1].denominator
        levels, values = levels[:-1], values[:-1]
    floor = ctx.mpf(floor) if floor is not None else ctx.mpf(10) ** (-(ctx.dps - 15))
    errs = []
    for v in values:
        v = ctx.mpf(v.numerator) / v.denominator if isinstance(v, Fraction) else ctx.mpf(v)
        errs.append(abs(v - ref))
    usable = [(n, e) for n, e in zip(levels, errs) if e > floor]
    if len(usable) < 4:
        if all(e <= floor for e in errs[len(errs) // 2:]):
            return ConvergenceEstimate(levels, errs, saturated=True, x=x_star)
        raise SolveError("fewer than four usable truncation levels")
    ns = [ctx.mpf(n) for n, _ in usable]
    ys = [ctx.log10(e) for _, e in usable]
    mn, my = sum(ns) / len(ns), sum(ys) / len(ys)
    slope = sum((a - mn) * (b - my) for a, b in zip(ns, ys)) / sum((a - mn) ** 2 for a in ns)
    icpt = my - slope * mn
    ratio = ctx.mpf(10) ** slope
    xs = ctx.mpf(x_star) if not isinstance(x_star, Fraction) else \
        ctx.mpf(x_star.numerator) / x_star.denominator
    beta = ctx.ln(xs / ratio)
    return ConvergenceEstimate(levels, errs, ratio, ctx.mpf(10) ** icpt, beta, x_star)
