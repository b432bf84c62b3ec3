"""Problem files: INI-style sections describing an initial value problem.

Example::

    [problem]
    name = riccati

    [params]
    names = c

    [unknowns]
    y.order = 1
    y.ic = c

    [equations]
    y = D(y, 1) = 1 + y^2

    [solver]
    order = 8
    backend = rational

An equation value is either ``D(u, alpha) = rhs`` / ``rhs`` (natural form,
normalised internally by multiplying with ``x^alpha``), or, under the key
``u.standard``, the right side ``A`` of ``x^alpha D^alpha u = A``.
"""
from __future__ import annotations

import configparser
from importlib import resources
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import Caputo, Mul, Node, Num, ODeriv, Unknown, XPow, params_in, substitute_params
from .parser import ParseError, parse_expression


class ProblemError(ValueError):
    """Aggregated validation errors for a problem file."""

    def __init__(self, messages: list[str]):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


@dataclass(frozen=True)
class PointConstraint:
    unknown: str
    at: Fraction
    value: Node
    text: str = ""


@dataclass
class ProblemSpec:
    name: str
    unknowns: tuple[str, ...]
    orders: dict            # unknown -> order expression
    ics: dict               # unknown -> list of expressions (u(0), u'(0), ...)
    rhs: dict               # unknown -> standard-form right side A
    params: tuple[str, ...] = ()
    bindings: dict = field(default_factory=dict)
    order: int | Fraction = 8
    precision: int = 50
    backend: str | None = None
    max_iterations: int | None = None
    log_cap: int | None = None
    headroom: Fraction | None = None
    domain: tuple = (Fraction(0), Fraction(1))
    constraints: list = field(default_factory=list)
    reference: dict = field(default_factory=dict)
    natural: dict = field(default_factory=dict)
    grid: tuple | None = None
    source: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.unknowns)

    def with_bindings(self, values: dict) -> "ProblemSpec":
        """Copy with additional parameter values (later values win)."""
        merged = {**self.bindings, **values}
        unknown = set(values) - set(self.params)
        if unknown:
            raise ProblemError([f"--param {n}: not a declared parameter" for n in sorted(unknown)])
        return _replace(self, bindings=merged)

    def bound(self) -> "ProblemSpec":
        """Substitute bound parameters into every expression."""
        if not self.bindings:
            return self
        b = self.bindings
        sub = lambda n: substitute_params(n, b)
        return _replace(
            self,
            orders={k: sub(v) for k, v in self.orders.items()},
            ics={k: [sub(e) for e in v] for k, v in self.ics.items()},
            rhs={k: sub(v) for k, v in self.rhs.items()},
            natural={k: sub(v) for k, v in self.natural.items()},
            reference={k: sub(v) for k, v in self.reference.items()},
            constraints=[PointConstraint(c.unknown, c.at, sub(c.value), c.text)
                         for c in self.constraints],
            params=tuple(p for p in self.params if p not in b),
            bindings={},
            meta={**self.meta, "bound": dict(b)},
        )


def _replace(spec: ProblemSpec, **kw) -> ProblemSpec:
    data = dict(spec.__dict__)
    data.update(kw)
    return ProblemSpec(**data)


def parse_value(text: str) -> Fraction:
    """Exact rational from ``3``, ``-1/3``, ``0.25`` or ``1e-3``."""
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(num.strip()) / Fraction(den.strip())
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def _split_top_eq(text: str):
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "=" and depth == 0:
            return text[:i], text[i + 1:]
    return None


_POINT_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*\(\s*([^()]+?)\s*\)\s*$")


def parse_problem(text: str) -> ProblemSpec:
    cp = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ProblemError([f"malformed problem file: {exc}"]) from exc
    errors: list[str] = []

    def sect(name):
        return cp[name] if cp.has_section(name) else {}

    name = sect("problem").get("name", "problem")
    params = tuple(p.strip() for p in sect("params").get("names", "").split(",") if p.strip())
    bindings = {}
    for key, val in sect("params").items():
        if key == "names":
            continue
        if key not in params:
            errors.append(f"[params] value for undeclared parameter {key!r}")
            continue
        try:
            bindings[key] = parse_value(val)
        except ValueError as exc:
            errors.append(f"[params] {key}: {exc}")

    unknowns: list[str] = []
    order_text: dict = {}
    ic_text: dict = {}
    for key, val in sect("unknowns").items():
        base, _, attr = key.partition(".")
        if base not in unknowns:
            unknowns.append(base)
        if attr == "order":
            order_text[base] = val
        elif attr == "ic":
            ic_text[base] = val
        else:
            errors.append(f"[unknowns] unsupported key {key!r} (use <name>.order / <name>.ic)")
    if not unknowns:
        errors.append("no unknowns declared")

    def parse(expr_text, where, allow_unknowns=True):
        try:
            return parse_expression(expr_text, params, unknowns if allow_unknowns else [])
        except ParseError as exc:
            for d in exc.diagnostics:
                errors.append(f"{where}: {d.render(expr_text)}")
            return None

    orders, ics, rhs, natural = {}, {}, {}, {}
    for u in unknowns:
        if u in order_text:
            orders[u] = parse(order_text[u], f"{u}.order", allow_unknowns=False)
        ics[u] = [parse(t, f"{u}.ic", allow_unknowns=False)
                  for t in ic_text.get(u, "").split(",") if t.strip()]

    eqs = sect("equations")
    for key, val in eqs.items():
        base, _, attr = key.partition(".")
        if base not in unknowns:
            errors.append(f"[equations] equation for undeclared unknown {base!r}")
            continue
        if attr == "standard":
            node = parse(val, f"equation {key}")
            if node is not None:
                rhs[base] = node
            continue
        if attr:
            errors.append(f"[equations] unsupported key {key!r}")
            continue
        parts = _split_top_eq(val)
        if parts is not None:
            lhs = parse(parts[0], f"equation {key} (left side)")
            right = parse(parts[1], f"equation {key}")
            if lhs is None or right is None:
                continue
            if isinstance(lhs, Caputo) and lhs.arg == Unknown(base):
                lorder = lhs.order
            elif isinstance(lhs, ODeriv) and lhs.arg == Unknown(base):
                lorder = Num(Fraction(lhs.n))
            else:
                errors.append(f"equation {key}: left side must be D({base}, order)")
                continue
            if base in orders and orders[base] is not None and orders[base] != lorder:
                errors.append(f"equation {key}: order differs from {base}.order")
                continue
            orders[base] = lorder
        else:
            right = parse(val, f"equation {key}")
            if right is None:
                continue
        if base not in orders:
            errors.append(f"equation {key}: no order given for {base}")
            continue
        if orders[base] is not None:
            rhs[base] = Mul((XPow(orders[base], 1), right))
            natural[base] = right
    for u in unknowns:
        if u not in rhs and not any(k.partition(".")[0] == u for k in eqs):
            errors.append(f"no equation for unknown {u!r}")
        if u not in orders:
            errors.append(f"no order for unknown {u!r}")

    solver = sect("solver")
    spec_kw = {}
    try:
        if "order" in solver:
            spec_kw["order"] = parse_value(solver["order"])
        if "precision" in solver:
            spec_kw["precision"] = int(solver["precision"])
        if "backend" in solver:
            spec_kw["backend"] = solver["backend"].strip()
            if spec_kw["backend"] not in ("rational", "float"):
                errors.append("[solver] backend must be rational or float")
        if "max_iterations" in solver:
            spec_kw["max_iterations"] = int(solver["max_iterations"])
        if "log_cap" in solver:
            spec_kw["log_cap"] = int(solver["log_cap"])
        if "headroom" in solver:
            spec_kw["headroom"] = parse_value(solver["headroom"])
    except ValueError as exc:
        errors.append(f"[solver] {exc}")

    domain = (Fraction(0), Fraction(1))
    if "domain" in sect("problem"):
        try:
            lo, hi = (parse_value(v) for v in sect("problem")["domain"].split(","))
            domain = (lo, hi)
        except ValueError as exc:
            errors.append(f"[problem] domain: {exc}")

    constraints = []
    for key, val in sect("constraints").items():
        parts = _split_top_eq(val)
        m = _POINT_RE.match(parts[0]) if parts else None
        if not m or m.group(1) not in unknowns:
            errors.append(f"[constraints] {key}: expected '<unknown>(<point>) = <value>'")
            continue
        try:
            at = parse_value(m.group(2))
        except ValueError as exc:
            errors.append(f"[constraints] {key}: {exc}")
            continue
        value = parse(parts[1], f"constraint {key}", allow_unknowns=False)
        if value is not None:
            constraints.append(PointConstraint(m.group(1), at, value, val.strip()))

    reference = {}
    grid = None
    for key, val in sect("reference").items():
        if key == "grid":
            try:
                lo, hi, n = [v.strip() for v in val.split(",")]
                grid = (parse_value(lo), parse_value(hi), int(n))
            except ValueError as exc:
                errors.append(f"[reference] grid: {exc}")
        elif key in unknowns:
            node = parse(val, f"reference {key}", allow_unknowns=False)
            if node is not None:
                reference[key] = node
        else:
            errors.append(f"[reference] unknown key {key!r}")

    meta = {k: v for k, v in sect("bench").items()} if cp.has_section("bench") else {}

    if not errors:
        _check_ic_counts(unknowns, orders, ics, bindings, errors)
    if errors:
        raise ProblemError(errors)
    return ProblemSpec(name=name, unknowns=tuple(unknowns), orders=orders, ics=ics, rhs=rhs,
                       params=params, bindings=bindings, domain=domain,
                       constraints=constraints, reference=reference, natural=natural,
                       grid=grid, source=text,
                       meta=meta, **spec_kw)


def order_at_zero(order: Node, bindings: dict | None = None) -> Fraction:
    """Exact ``alpha(0)`` of an order expression."""
    from .evaluate import SeriesEvaluator
    from .scalars import FloatBackend, to_exponent

    be = FloatBackend(30)
    ev = SeriesEvaluator(be, 1, names=(), param_values=bindings or {})
    s = ev.value(order, {})
    c = s.coefficient(0, 0)
    if not c.is_constant():
        raise ValueError("order depends on an unbound parameter")
    return to_exponent(c.constant_value(be.scalar(0)), be)


def _check_ic_counts(unknowns, orders, ics, bindings, errors):
    for u in unknowns:
        order = orders.get(u)
        if order is None:
            continue
        if params_in(order) - set(bindings):
            continue  # checked once the parameter is bound
        try:
            a0 = order_at_zero(order, bindings)
        except Exception as exc:  # noqa: BLE001 - reported as a diagnostic
            errors.append(f"{u}.order: cannot evaluate at 0 ({exc})")
            continue
        n = math.ceil(a0)
        if len(ics[u]) != n:
            errors.append(f"{u}: order {a0} needs {n} initial condition(s), got {len(ics[u])}")


def load_problem(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def bundled_problems() -> list[str]:
    """Stems of the problem files shipped with the package."""
    root = resources.files("rilt") / "problems"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".prob"))


def load_bundled(name: str) -> ProblemSpec:
    path = resources.files("rilt") / "problems" / f"{name}.prob"
    if not path.is_file():
        raise ProblemError([f"no bundled problem named {name!r}"])
    return parse_problem(path.read_text(encoding="utf-8"))
