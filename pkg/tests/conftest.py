from __future__ import annotations

import pytest

from vwpsum.harness import REFERENCE_POINTS

# criterion number -> (passed, detail); filled by test_acceptance.py
CRITERIA: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = (passed, detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def point_1d() -> dict:
    return dict(REFERENCE_POINTS["1d"])


@pytest.fixture
def point_rd() -> dict:
    return dict(REFERENCE_POINTS["rd"])
