import pytest

# one "criterion N: PASS|FAIL ..." line per acceptance criterion, filled in by
# tests/test_acceptance.py and echoed after the run
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def report():
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
