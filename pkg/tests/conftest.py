import pytest

_CRITERIA: list[str] = []


class CriterionLog:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(self, number, passed: bool | None, text: str) -> bool | None:
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        _CRITERIA.append(f"{status} criterion {number}: {text}")
        return passed


@pytest.fixture(scope="session")
def criteria():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
