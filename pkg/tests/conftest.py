import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_report():
    """Record one line per acceptance criterion for the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((label, bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
