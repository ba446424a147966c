import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one result line per acceptance criterion for the terminal summary."""

    def _record(number, ok, text):
        ACCEPTANCE[number] = (ok, text)
        print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")
