from fractions import Fraction

import mpmath
import pytest

from rilt import series as S
from rilt.engine import (SolveError, convergence_probe, ic_series, iterate_once, prepare,
                         residual, residual_max, solve, step_solve)
from rilt.problem import load_bundled, parse_problem
from rilt.scalars import ParamScalar
from rilt.series import Series

GROWTH = """
[problem]
name = growth
[unknowns]
y.order = 1
y.ic = 1
[equations]
y = D(y, 1) = y
[solver]
order = 12
precision = 30
backend = float
"""

ZERO = """
[problem]
name = zero
[unknowns]
u.order = 1/2
u.ic = 0
[equations]
u.standard = 0
[solver]
order = 6
backend = float
"""


def _c_poly(coeffs):
    """ParamScalar sum coeffs[i] c^i."""
    c = ParamScalar.param("c", ("c",))
    out = ParamScalar.const(0, ("c",))
    for i, a in enumerate(coeffs):
        out = out + c ** i * Fraction(a) if i else out + ParamScalar.const(Fraction(a), ("c",))
    return out


def test_riccati_first_iterates_are_polynomials_in_c():
    setup = prepare(load_bundled("riccati"))
    cur = {"y": ic_series(setup, "y")}
    cur = iterate_once(setup, cur)
    y1 = cur["y"]
    assert y1.coefficient(0) == _c_poly([0, 1])
    assert y1.coefficient(1) == _c_poly([1, 0, 1])
    assert len(y1) == 2
    y2 = iterate_once(setup, cur)["y"]
    assert y2.coefficient(2) == _c_poly([0, 1, 0, 1])
    assert y2.coefficient(3) == _c_poly([Fraction(1, 3), 0, Fraction(2, 3), 0, Fraction(1, 3)])


def test_riccati_third_order_coefficient():
    rep = solve(load_bundled("riccati"), order=3)
    assert rep.backend == "rational"
    assert rep.solution["y"].coefficient(3) == _c_poly([Fraction(1, 3), 0, Fraction(4, 3), 0, 1])


def test_riccati_at_zero_is_tangent_series():
    rep = solve(load_bundled("riccati"), params={"c": 0})
    y = rep.solution["y"]
    assert y == Series({(1, 0): 1, (3, 0): Fraction(1, 3), (5, 0): Fraction(2, 15),
                        (7, 0): Fraction(17, 315)}, 8)
    assert rep.residual_max == 0


def test_logpower_first_iterate():
    setup = prepare(load_bundled("logpower"))
    y1 = iterate_once(setup, {"y": ic_series(setup, "y")})["y"].with_caps(1)
    tol = setup.tolerance
    assert set(y1.terms) == {(0, 0), (1, 1)}
    assert abs(y1.coefficient(0).constant_value() - 1) < tol
    assert abs(y1.coefficient(1, 1).constant_value() - 1) < tol


def test_prefix_stability():
    for name, kw in (("riccati", {}), ("logpower", {"order": 6}),
                     ("frac_riccati", {"order": 8})):
        setup = prepare(load_bundled(name), **kw)
        cur = {u: ic_series(setup, u) for u in setup.problem.unknowns}
        history = [cur]
        for _ in range(int(setup.cap) + 3):
            cur = iterate_once(setup, cur)
            history.append(cur)
        u = setup.problem.unknowns[0]
        tol = setup.tolerance
        for p in range(1, int(setup.cap) + 1):
            def low(s):
                return {k: c for k, c in s[u].terms.items() if k[0] <= p}

            def same(a, b):
                keys = set(a) | set(b)
                zero = ParamScalar.const(0)
                return all((a.get(k, zero) - b.get(k, zero)).magnitude() <= tol for k in keys)
            first = next((j for j in range(1, len(history))
                          if same(low(history[j - 1]), low(history[j]))), None)
            assert first is not None, (name, p)
            for j in range(first, len(history)):
                assert same(low(history[first]), low(history[j])), (name, p, j)


def test_solve_is_deterministic():
    a = solve(load_bundled("logpower"), order=6)
    b = solve(load_bundled("logpower"), order=6)
    assert S.serialize(a.solution["y"]) == S.serialize(b.solution["y"])


def test_residual_detects_perturbation():
    problem = load_bundled("volterra")
    setup = prepare(problem)
    be = setup.backend
    exact = {"u": Series({(3, 0): 1}, setup.work_cap, setup.log_cap, be)}
    res = residual(setup, exact)
    assert residual_max(res, setup.cap) <= mpmath.mpf(10) ** -(problem.precision - 10)
    bumped = {"u": exact["u"] + Series({(2, 0): Fraction(1, 1000)}, setup.work_cap,
                                       setup.log_cap, be)}
    assert residual_max(residual(setup, bumped), setup.cap) > 1e-4


def test_zero_problem_has_zero_residual():
    rep = solve(parse_problem(ZERO))
    assert not rep.solution["u"]
    assert rep.residual_max == 0


def test_fredholm_constant_and_roots():
    rep = solve(load_bundled("fredholm"))
    c = rep.parameters["c"]
    assert abs(c - Fraction(1, 8)) < 1e-20
    assert rep.presolution is not None
    assert len(rep.roots) >= 1


def test_ic_count_mismatch_in_prepare():
    problem = load_bundled("riccati")
    from rilt.problem import _replace
    bad = _replace(problem, ics={"y": []})
    with pytest.raises(SolveError, match="initial condition"):
        prepare(bad)


def test_bad_order_rejected():
    with pytest.raises(SolveError):
        prepare(load_bundled("riccati"), order=0)


def test_stepping_exponential():
    traj = step_solve(parse_problem(GROWTH), Fraction(1, 10), 1, order=12)
    assert len(traj.times) == 11
    ctx = mpmath.mp.clone() if hasattr(mpmath.mp, "clone") else mpmath.mp
    assert abs(traj.states[-1][0] - ctx.e) <= 1e-10


def test_stepping_rotation_and_self_convergence():
    problem = load_bundled("rotation")
    coarse = step_solve(problem, Fraction(1, 10), 2)
    for t, (x, y) in zip(coarse.times, coarse.states):
        assert abs(x - mpmath.cos(t)) <= 1e-10
        assert abs(y - mpmath.sin(t)) <= 1e-10
    fine = step_solve(problem, Fraction(1, 100), 2)
    for t, st in zip(coarse.times, coarse.states):
        other = fine.at(t)
        assert max(abs(a - b) for a, b in zip(st, other)) <= 1e-12


def test_stepping_rejects_fractional_systems():
    with pytest.raises(SolveError):
        step_solve(load_bundled("volterra"), Fraction(1, 10), 1)
    with pytest.raises(SolveError):
        step_solve(parse_problem(GROWTH), 0, 1)


def test_convergence_probe_geometric_and_saturated():
    est = convergence_probe(load_bundled("riccati"), Fraction(1, 2), [5, 10, 15, 20, 25, 30],
                            reference=lambda ctx: ctx.tan(ctx.mpf(1) / 2), params={"c": 0},
                            backend="float")
    assert est.ratio < 1
    sat = convergence_probe(load_bundled("varorder"), Fraction(1, 2), [3, 4, 5, 6])
    assert sat.saturated
    with pytest.raises(SolveError):
        convergence_probe(load_bundled("riccati"), Fraction(1, 2), [3, 4, 5])
