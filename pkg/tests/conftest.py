import pytest

from combspace.comb import build
from combspace.pathmetric import metric_for


@pytest.fixture(scope="session")
def comb5():
    return build(5, 10.0)


@pytest.fixture(scope="session")
def metric5(comb5):
    return metric_for(comb5, 0.1)


@pytest.fixture(scope="session")
def comb3():
    return build(3, 10.0)


@pytest.fixture(scope="session")
def metric3(comb3):
    return metric_for(comb3, 0.1)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
