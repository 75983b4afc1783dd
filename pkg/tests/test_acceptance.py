"""One test per acceptance criterion; each prints a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines, or
``nhcontrol selftest`` for the same checks outside pytest.
"""

import pytest

from nhcontrol import acceptance


@pytest.fixture(scope="module")
def ctx():
    return acceptance.Context(seed=0)


@pytest.mark.parametrize("check", acceptance.CHECKS, ids=lambda c: c.__name__)
def test_criterion(ctx, check, capsys):
    res = check(ctx)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
