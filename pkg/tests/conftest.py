"""Shared pytest hooks: acceptance results are echoed in the terminal summary."""

import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(criterion, passed, detail):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(
            f"ACCEPTANCE criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
