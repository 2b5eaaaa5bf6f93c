import numpy as np
import pytest

from tofinv.model import STEEL_PROPS, make_grid

# closed form of 2L / V(26) for the steel specimen, L = 50 mm
TOF_26C = 0.1 / (-0.4521 * 26.0 + 3259.9)


@pytest.fixture
def props():
    return STEEL_PROPS


@pytest.fixture
def small_grid():
    return make_grid(0.05, 500.0, 20, 20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
