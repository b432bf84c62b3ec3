"""Acceptance gate: one PASS/FAIL line per criterion, printed to the terminal."""
import pytest

from rilt.bench import CRITERIA, run_one


@pytest.mark.slow
@pytest.mark.parametrize("cid", list(CRITERIA))
def test_criterion(cid, capsys):
    rec = run_one(cid)
    line = (f"[{'PASS' if rec.passed else 'FAIL'}] criterion {rec.id}: measured {rec.measured}"
            f" | threshold {rec.threshold} | {rec.seconds:.2f} s")
    if rec.detail:
        line += f" | {rec.detail}"
    with capsys.disabled():
        print("\n" + line)
    assert rec.passed, line
