"""Command line interface.

Exit codes: 0 success, 1 usage, 2 parse, 3 solve failure, 4 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from . import series as S
from .engine import SolveError, convergence_probe, residual, residual_max, solve, step_solve
from .engine import prepare
from .evaluate import EvalError
from .parser import ParseError
from .problem import ProblemError, bundled_problems, load_bundled, load_problem, parse_value
from .scalars import BackendError, FloatBackend, ParameterError, make_backend
from .series import SeriesError

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_SOLVE, EXIT_BENCH = 0, 1, 2, 3, 4
PRECISION_ENV = "RILT_PRECISION"

log = logging.getLogger("rilt")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--order", type=str, help="truncation order N")
    g.add_argument("--precision", type=int, help=f"decimal digits (default ${PRECISION_ENV} or file)")
    g.add_argument("--backend", choices=("rational", "float"))
    g.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="bind a declared parameter (repeatable)")
    g.add_argument("--format", choices=("csv", "json"), help="output format")
    g.add_argument("--out", help="write output to this file (atomically)")
    g.add_argument("--seed", type=int, help="seed for randomized checks")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = _Parser(prog="rilt", description="Log-power series solver for fractional IVPs.")
    ap.add_argument("--version", action="version", version=f"rilt {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", parents=[common], help="solve and print the series")
    s.add_argument("problem")
    s = sub.add_parser("eval", parents=[common], help="evaluate the solution on a grid")
    s.add_argument("problem")
    s.add_argument("--at", required=True, help="grid: 'lo:hi:n' or comma-separated points")
    s = sub.add_parser("residual", parents=[common], help="residual series of the solution")
    s.add_argument("problem")
    s = sub.add_parser("traj", parents=[common], help="stepped trajectory of a first-order system")
    s.add_argument("problem")
    s.add_argument("--dt", required=True)
    s.add_argument("--until", required=True)
    s = sub.add_parser("bench", parents=[common], help="run an acceptance suite")
    s.add_argument("suite")
    s.add_argument("--only", nargs="+", metavar="ID", help="criterion ids to run")
    s.add_argument("--jobs", type=int, default=1)
    s = sub.add_parser("converge", parents=[common], help="fit the truncation error decay")
    s.add_argument("problem")
    s.add_argument("--levels", nargs="+", type=int, required=True)
    s.add_argument("--x", dest="x_star", default="1/2", help="sample point (default 1/2)")
    sub.add_parser("list", parents=[common], help="list bundled problems")
    return ap


# -- helpers ---------------------------------------------------------------------------

def write_atomic(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(name: str):
    path = Path(name)
    if path.exists():
        return load_problem(path)
    stem = path.name[:-5] if path.name.endswith(".prob") else path.name
    if stem in bundled_problems():
        return load_bundled(stem)
    raise UsageError(f"no such problem file: {name}")


def _params(items) -> dict:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            out[name.strip()] = parse_value(value)
        except ValueError as exc:
            raise UsageError(f"--param {name}: {exc}") from exc
    return out


def _solve_kw(args) -> dict:
    kw = {}
    if args.order is not None:
        try:
            kw["order"] = parse_value(args.order)
        except ValueError as exc:
            raise UsageError(f"--order: {exc}") from exc
    precision = args.precision
    if precision is None and os.environ.get(PRECISION_ENV):
        try:
            precision = int(os.environ[PRECISION_ENV])
        except ValueError:
            raise UsageError(f"${PRECISION_ENV} must be an integer") from None
    if precision is not None:
        kw["precision"] = precision
    if args.backend:
        kw["backend"] = args.backend
    params = _params(args.param)
    if params:
        kw["params"] = params
    return kw


def _grid(spec: str) -> list:
    spec = spec.strip()
    if not spec:
        return []
    try:
        if ":" in spec:
            lo, hi, n = spec.split(":")
            lo, hi, n = parse_value(lo), parse_value(hi), int(n)
            if n < 1:
                raise ValueError("point count must be positive")
            if n == 1:
                return [lo]
            return [lo + (hi - lo) * i / (n - 1) for i in range(n)]
        return [parse_value(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--at: {exc}") from exc


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _num_text(backend, v) -> str:
    """Exact text on the rational backend, otherwise ``precision`` significant digits."""
    if backend.exact:
        return str(v)
    v = backend.scalar(v)
    return backend.ctx.nstr(v, backend.precision, min_fixed=-4, max_fixed=8) if v else "0"


# -- commands --------------------------------------------------------------------------

def cmd_solve(args) -> int:
    problem = _load(args.problem)
    rep = solve(problem, **_solve_kw(args))
    doc = {
        "problem": problem.name,
        "solution": {u: json.loads(S.serialize(s, rep.lattice)) for u, s in rep.solution.items()},
        "report": rep.to_json(),
    }
    if rep.presolution is not None:
        doc["presolution"] = {u: json.loads(S.serialize(s, rep.lattice))
                              for u, s in rep.presolution.items()}
    doc["report"].pop("wall_time")  # keep output byte-identical across runs
    write_atomic(args.out, json.dumps(doc, indent=1) + "\n")
    log.info("solved %s in %.3f s (%d iterations)", problem.name, rep.wall_time, rep.iterations)
    return EXIT_OK


def cmd_eval(args) -> int:
    problem = _load(args.problem)
    grid = _grid(args.at)
    rep = solve(problem, **_solve_kw(args))
    be = make_backend(rep.backend, _solve_kw(args).get("precision", problem.precision))
    names = list(rep.solution)
    rows = []
    for x in grid:
        if x < 0:
            raise UsageError("evaluation points must be nonnegative")
        vals = [S.evaluate(rep.solution[u], be.scalar(x)) for u in names]
        rows.append([_num_text(be, x)] + [_num_text(be, v) for v in vals])
    if args.format == "json":
        text = json.dumps({"x": [r[0] for r in rows],
                           **{u: [r[i + 1] for r in rows] for i, u in enumerate(names)}},
                          indent=1) + "\n"
    else:
        text = _csv(["x"] + names, rows)
    write_atomic(args.out, text)
    return EXIT_OK


def cmd_residual(args) -> int:
    problem = _load(args.problem)
    kw = _solve_kw(args)
    rep = solve(problem, **kw)
    setup = prepare(problem, **{k: v for k, v in kw.items()})
    res = residual(setup, rep.solution, rep.parameters)
    doc = {
        "residual_max": str(residual_max(res, setup.cap)),
        "residual": {u: json.loads(S.serialize(s)) for u, s in res.items()},
    }
    write_atomic(args.out, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK


def cmd_traj(args) -> int:
    problem = _load(args.problem)
    kw = _solve_kw(args)
    try:
        dt, until = parse_value(args.dt), parse_value(args.until)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    traj = step_solve(problem, dt, until, order=kw.get("order"), precision=kw.get("precision"),
                      params=kw.get("params"))
    be = FloatBackend(kw.get("precision") or problem.precision)
    header = ["t"] + list(traj.names)
    rows = [[_num_text(be, v) for v in row] for row in traj.rows()]
    if args.format == "json":
        text = json.dumps([dict(zip(header, r)) for r in rows], indent=1) + "\n"
    else:
        text = _csv(header, rows)
    write_atomic(args.out, text)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import manifest_csv, manifest_json, run_suite
    if not args.suite.strip():
        raise UsageError("bench needs a suite name")
    try:
        records = run_suite(args.suite, args.only, args.jobs, seed=args.seed)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    text = manifest_csv(records) if args.format == "csv" else manifest_json(records)
    write_atomic(args.out, text)
    for r in records:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.id}: {r.measured}", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in records) else EXIT_BENCH


def cmd_converge(args) -> int:
    problem = _load(args.problem)
    kw = _solve_kw(args)
    kw.pop("order", None)
    try:
        x_star = parse_value(args.x_star)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    est = convergence_probe(problem, x_star, args.levels, **kw)
    doc = {
        "x": str(x_star),
        "levels": est.levels,
        "errors": [str(e) for e in est.errors],
        "saturated": est.saturated,
        "ratio": None if est.ratio is None else str(est.ratio),
        "M": None if est.M is None else str(est.M),
        "beta": None if est.beta is None else str(est.beta),
    }
    write_atomic(args.out, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK


def cmd_list(args) -> int:
    write_atomic(args.out, "".join(f"{n}\n" for n in bundled_problems()))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "eval": cmd_eval, "residual": cmd_residual, "traj": cmd_traj,
            "bench": cmd_bench, "converge": cmd_converge, "list": cmd_list}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rilt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProblemError, ParseError) as exc:
        print(f"rilt: parse error:\n{exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SolveError, EvalError, SeriesError, BackendError, ParameterError, ValueError) as exc:
        print(f"rilt: solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
