import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the lines are printed after the run."""
    def record(criterion, ok, detail):
        line = f"criterion {criterion:<24s} {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
