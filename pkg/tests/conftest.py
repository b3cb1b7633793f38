import pytest

from ksblowup.params import ModelParams, derive

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def mp():
    return ModelParams.from_chi_N(3, 1.6, 8.0, 60.0)


@pytest.fixture(scope="session")
def dp(mp):
    return derive(mp, 1.2)


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion for the terminal summary."""
    def _record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
