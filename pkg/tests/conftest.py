import pytest

_REPORT: dict[str, str] = {}


@pytest.fixture
def report():
    """Record one acceptance line: report("A1", passed, "detail")."""

    def record(key: str, passed: bool, detail: str) -> None:
        line = f"{key} {'PASS' if passed else 'FAIL'}  {detail}"
        _REPORT[key] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_REPORT, key=lambda k: int(k[1:])):
        terminalreporter.write_line(_REPORT[key])
