import pytest

from wmcoherence.model import HarmonicSurface, TwoStateSystem, published_system

# filled by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def system():
    return published_system()


@pytest.fixture(scope="session")
def identical():
    """Equal curvatures and minima, upper surface 0.1 above."""
    return TwoStateSystem(HarmonicSurface(2000.0, 0.01, 0.0, 0.0),
                          HarmonicSurface(2000.0, 0.01, 0.0, 0.1))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
