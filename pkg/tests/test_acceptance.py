"""The thirteen acceptance criteria at their stated tolerances.

Runs at full scale (10^5 paths, dt = 1e-3) unless ``BUNDLEHEAT_QUICK=1``.
Each criterion prints one PASS/FAIL line; the lines are repeated in the
pytest terminal summary.
"""
import os

import pytest

from bundleheat.acceptance import CRITERIA, Context, run_criterion

QUICK = os.environ.get("BUNDLEHEAT_QUICK", "") not in ("", "0")
RESULTS = []


@pytest.fixture(scope="module")
def ctx():
    return Context.make(quick=QUICK)


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx):
    res = run_criterion(number, ctx)
    line = f"{res.line()} ({res.seconds:.0f}s)"
    RESULTS.append(line)
    print(line)
    assert res.passed, line
