import csv
import io
import json

import pytest

from rilt.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_prints_symbolic_coefficient(capsys):
    code, out, _ = run(capsys, "solve", "riccati", "--order", "3", "--backend", "rational")
    assert code == 0
    terms = json.loads(out)["solution"]["y"]["terms"]
    (x3,) = [t for t in terms if t["p"] == "3/1"]
    assert x3["c"] == "1/3 + 4/3*c^2 + c^4"


@pytest.mark.parametrize("argv", [
    ("solve", "riccati", "--order", "5"),
    ("solve", "logpower", "--order", "4"),
    ("eval", "rotation", "--at", "0:1:5"),
])
def test_outputs_are_byte_identical(capsys, argv):
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0 and first[1] == second[1]


def test_out_file_matches_stdout(capsys, tmp_path):
    target = tmp_path / "sol.json"
    _, out, _ = run(capsys, "solve", "riccati", "--order", "4")
    assert run(capsys, "solve", "riccati", "--order", "4", "--out", str(target))[0] == 0
    assert target.read_text() == out
    assert [p.name for p in tmp_path.iterdir()] == ["sol.json"]


def test_eval_csv_and_empty_grid(capsys):
    code, out, _ = run(capsys, "eval", "riccati", "--param", "c=0", "--at", "0, 1/2")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["x", "y"] and len(rows) == 3
    code, out, _ = run(capsys, "eval", "riccati", "--at", "")
    assert code == 0 and out == "x,y\n"


def test_eval_json(capsys):
    code, out, _ = run(capsys, "eval", "loggrowth", "--at", "1/4", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["x"] == ["1/4"] and len(doc["y"]) == 1


def test_traj_layout(capsys):
    code, out, _ = run(capsys, "traj", "rotation", "--dt", "0.1", "--until", "2")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["t", "X", "Y"]
    assert len(rows) == 22


def test_residual_and_converge(capsys):
    code, out, _ = run(capsys, "residual", "riccati", "--param", "c=0")
    assert code == 0 and json.loads(out)["residual_max"] == "0"
    code, out, _ = run(capsys, "converge", "riccati", "--param", "c=0", "--backend", "float",
                       "--levels", "4", "6", "8", "10", "12")
    assert code == 0 and float(json.loads(out)["ratio"]) < 1


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0 and "rossler" in out.split()


@pytest.mark.parametrize("argv,code", [
    ((), 1),
    (("solve",), 1),
    (("solve", "no_such_problem"), 1),
    (("solve", "riccati", "--param", "c"), 1),
    (("solve", "riccati", "--order", "abc"), 1),
    (("eval", "riccati", "--at", "0:1:0"), 1),
    (("bench", ""), 1),
    (("bench", "nonexistent"), 1),
    (("solve", "riccati", "--param", "nope=1"), 2),
    (("solve", "riccati", "--order", "0"), 3),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_parse_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.prob"
    bad.write_text("[unknowns]\ny.order = 1\ny.ic = 0\n[equations]\ny = D(y, 1) = y +\n")
    code, _, err = run(capsys, "solve", str(bad))
    assert code == 2 and "parse error" in err


def test_precision_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("RILT_PRECISION", "20")
    _, out, _ = run(capsys, "eval", "rotation", "--at", "1")
    x = next(csv.reader(io.StringIO(out.splitlines()[1])))[1]
    assert len(x.replace("0.", "").lstrip("0")) <= 21
    monkeypatch.setenv("RILT_PRECISION", "many")
    assert run(capsys, "eval", "rotation", "--at", "1")[0] == 1


def test_bench_single_criterion(capsys, tmp_path):
    target = tmp_path / "manifest.csv"
    code, _, err = run(capsys, "bench", "acceptance", "--only", "1", "--format", "csv",
                       "--out", str(target))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(target.read_text())))
    assert [r["id"] for r in rows] == ["1"]
    assert "[PASS] 1" in err
