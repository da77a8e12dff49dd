import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} {detail}"
        _LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
