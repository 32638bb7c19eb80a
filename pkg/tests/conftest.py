import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; lines are echoed in the summary."""
    def record(label, passed, detail=""):
        tag = "INFO" if passed is None else ("PASS" if passed else "FAIL")
        line = f"{tag} {label}" + (f": {detail}" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
