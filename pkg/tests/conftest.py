import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def record():
    """Store a PASS/FAIL line for the acceptance summary."""

    def _record(key: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}"
        ACCEPTANCE_LINES[key] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split(".")[0])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
