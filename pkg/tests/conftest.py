import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one criterion line, print it, and fail the test when it is red."""

    def record(number: int, ok: bool, detail: str):
        line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
