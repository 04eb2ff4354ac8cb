import pytest

# criterion number -> one-line verdict, filled in by test_acceptance.py
ACCEPTANCE = {}


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


@pytest.fixture
def acceptance_record():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
