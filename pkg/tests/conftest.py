import pytest
from hypothesis import settings

from catfeyn.fock import TheoryParams
from catfeyn.lattice import LatticeParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def oracle():
    """Desk-scale lattice used throughout: 15 sites per axis."""
    return LatticeParams(3, 5)


@pytest.fixture
def tiny():
    return LatticeParams(1, 3)


@pytest.fixture
def theory():
    return TheoryParams()


_CRITERIA: list[tuple[int, str, str]] = []


@pytest.fixture
def criterion(record_property):
    """Attach a criterion number and a one-line summary to an acceptance test."""

    def note(number: int, summary: str):
        record_property("criterion", (number, summary))

    return note


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, value in report.user_properties:
        if name == "criterion":
            number, summary = value
            _CRITERIA.append((number, "PASS" if report.passed else "FAIL", summary))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, summary in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number}: {verdict}  {summary}")
