import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(capsys):
    """Record and echo one PASS/FAIL line for an acceptance criterion."""
    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _CRITERIA[number] = line
        with capsys.disabled():
            print(f"\n    {line}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
