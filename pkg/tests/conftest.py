"""Shared test plumbing: the acceptance-criterion recorder.

Each acceptance test finishes with one criterion(...) call; the recorded
lines are replayed as a terminal section so a full run ends with one
PASS/FAIL line per criterion, measured values included.
"""

import pytest

_criterion_lines: dict[int, str] = {}


@pytest.fixture
def criterion():
    def _record(number: int, name: str, passed: bool, detail: str) -> None:
        status = "PASS" if passed else "FAIL"
        _criterion_lines[number] = f"criterion {number} [{status}] {name}: {detail}"
        assert passed, f"criterion {number} ({name}): {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_lines):
        terminalreporter.write_line(_criterion_lines[number])
