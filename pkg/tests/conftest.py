import pytest

_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record one pass line per acceptance criterion; echoed in the
    terminal summary so the gate's verdict survives output capture."""

    def record(line: str) -> None:
        _acceptance_lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.line(line)
