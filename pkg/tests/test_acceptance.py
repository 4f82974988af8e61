"""Acceptance criteria 1-13, one PASS/FAIL line each.

Run under pytest (the lines are collected into the terminal summary) or
directly with ``python3 tests/test_acceptance.py``.
"""

import time

import pytest

from fchc.acceptance import run_check
from fchc.cli import main

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # executed as a script
    ACCEPTANCE_LINES = []


def _record(number, line):
    ACCEPTANCE_LINES.append((number, line))
    print(line)


@pytest.mark.parametrize("number", range(1, 13))
def test_criterion(number):
    result = run_check(number, seed=0)
    _record(number, result.line())
    assert result.passed, result.detail


def test_criterion_13_selftest(tmp_path):
    start = time.perf_counter()
    code = main(["selftest", "--out", str(tmp_path)])
    status = "PASS" if code == 0 else "FAIL"
    _record(13, f"[{status}] 13 selftest command: exit code {code} (expected 0) in {time.perf_counter() - start:.1f}s")
    assert code == 0


if __name__ == "__main__":
    import sys
    import tempfile

    failed = 0
    for n in range(1, 13):
        res = run_check(n, seed=0)
        print(res.line())
        failed += not res.passed
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["selftest", "--out", tmp])
    print(f"[{'PASS' if code == 0 else 'FAIL'}] 13 selftest command: exit code {code} (expected 0)")
    sys.exit(1 if failed or code else 0)
