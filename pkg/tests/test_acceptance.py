"""Acceptance battery: one pass/fail line per criterion.

Tolerances live in kpzcubic.acceptance (TOL_*).  Run directly with
``python tests/test_acceptance.py`` to print only the summary lines.
"""

import pytest

from kpzcubic import acceptance

RESULTS = {}


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    r = acceptance.CRITERIA[number]()
    RESULTS[number] = r
    print(r.line())
    for c in r.checks:
        if c.passed is False:
            print(f"    FAIL {c.name}: {c.value:.3e} (tol {c.tol})")
    assert r.passed, r.line()


if __name__ == "__main__":
    import sys

    ok = True
    for r in acceptance.run():
        print(r.line(), flush=True)
        ok &= r.passed
    sys.exit(0 if ok else 1)
