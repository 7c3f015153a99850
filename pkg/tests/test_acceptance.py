"""Acceptance criteria 1-11 at their stated tolerances, one PASS/FAIL line each.

Run standalone with ``python tests/test_acceptance.py`` for just the summary lines.
"""

import sys

import pytest

from tstfnbp.verification import CHECKS, run_one


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    result = run_one(number, seed=42)
    with capsys.disabled():
        print("\n" + result.line())
    detail = "\n".join(map(str, result.rows[:20]))
    assert result.passed, f"{result.line()}\n{detail}"


if __name__ == "__main__":
    failed = 0
    for n in sorted(CHECKS):
        r = run_one(n, seed=42)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
