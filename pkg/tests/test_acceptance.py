"""Acceptance criteria 1-14 at the reference configuration (seed 0, R = 10^4).

The whole suite runs once per session.  Each criterion is its own test, and
the PASS/FAIL lines are printed in the terminal summary (see conftest.py).
Run this file directly to print only those lines.
"""

import json
import sys

import pytest

from urnlab.acceptance import CRITERIA, run_acceptance

SEED = 0
R = 10_000

LINES: list = []


def failing(details, path=""):
    """Names of the failed checks nested anywhere in a criterion's details."""
    if isinstance(details, dict):
        if details.get("passed") is False and "name" in details:
            return [f"{path}{details['name']}: {details.get('empirical')} vs {details.get('bound')}"]
        return [x for k, v in details.items() for x in failing(v, f"{path}{k}/" if k != "verdicts" else path)]
    if isinstance(details, list):
        return [x for v in details for x in failing(v, path)]
    return []


@pytest.fixture(scope="module")
def results():
    out = run_acceptance(SEED, R, jobs=1, echo=LINES.append)
    return {r.number: r for r in out}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(results, number):
    res = results[number]
    if not res.passed:
        reasons = failing(res.details) or [json.dumps(res.to_dict()["details"], sort_keys=True)]
        pytest.fail("\n".join([res.line()] + reasons), pytrace=False)


if __name__ == "__main__":
    outcome = run_acceptance(SEED, R, jobs=1, echo=print)
    sys.exit(0 if all(r.passed for r in outcome) else 1)
