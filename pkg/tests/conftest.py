import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number, title, ok, detail):
        _ACCEPTANCE.append(f"[{number}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s[1:s.index("]")])):
            terminalreporter.write_line(line)
