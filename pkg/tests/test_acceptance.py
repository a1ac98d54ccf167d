"""Acceptance gate: every shipping criterion must pass at its stated
tolerance.  One test per criterion; each prints its pass/fail line.

The 100-robot field study is heavy and sits behind the same switch as the
CLI ``accept --large`` flag; set ORBITCOVER_LARGE=1 to include it.
"""

import os

import pytest

from orbitcover import acceptance


@pytest.mark.parametrize("criterion", acceptance.DEFAULT_CRITERIA,
                         ids=lambda fn: fn.__name__.removeprefix("check_"))
def test_criterion(criterion):
    result = criterion()
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] {result.name} ({result.seconds:.1f}s): {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"


@pytest.mark.skipif(not os.environ.get("ORBITCOVER_LARGE"),
                    reason="100-robot study runs behind the --large flag")
def test_criterion_scale100():
    result = acceptance.check_scale100()
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] {result.name} ({result.seconds:.1f}s): {result.detail}")
    assert result.passed, f"{result.name}: {result.detail}"
