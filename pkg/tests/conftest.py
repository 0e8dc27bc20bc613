import pytest

_REPORT = []


@pytest.fixture
def acceptance():
    """``acceptance(number, ok, detail)`` logs one criterion line for the terminal summary."""

    def record(number, ok, detail):
        _REPORT.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_REPORT, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
