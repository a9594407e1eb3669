import pytest

# filled by the acceptance suite: criterion id -> (passed, summary)
ACCEPTANCE: dict = {}


@pytest.fixture
def record_criterion():
    def record(key: str, passed: bool, summary: str) -> None:
        ACCEPTANCE[key] = (passed, summary)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        passed, summary = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {summary}")
