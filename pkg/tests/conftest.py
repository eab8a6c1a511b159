import pytest

from helpers import ACCEPTANCE_LINES, certified_inverter, default_plant, reference_loop


@pytest.fixture(scope="session")
def plant():
    return default_plant()


@pytest.fixture(scope="session")
def reference_clb():
    return reference_loop()


@pytest.fixture(scope="session")
def reference_inverter():
    return certified_inverter()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
