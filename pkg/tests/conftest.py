import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, ok, detail)``."""

    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
