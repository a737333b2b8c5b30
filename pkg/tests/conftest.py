import pytest

_LINES = {}


@pytest.fixture
def verdict_line():
    """Record one PASS/FAIL line per acceptance criterion; echoed at the end of the run."""
    def emit(number, name, ok, detail, seconds):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {name}: {detail}  [{seconds:.1f}s]"
        _LINES[number] = line
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
