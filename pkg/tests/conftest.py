import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from firegrid import _kernels  # noqa: E402
from firegrid.landscape import FuelRecord  # noqa: E402
from firegrid.spread import FuelModelEntry, ParametricSpreadModel  # noqa: E402

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

C2 = FuelRecord(2, 2, "Boreal Spruce", "C-2")
WATER = FuelRecord(102, 102, "Water", "WA")


def circle_model(rate: float) -> ParametricSpreadModel:
    """Windless, slope-free, equal head and back rates: spreads as a circle."""
    return ParametricSpreadModel([FuelModelEntry("C-2", rate)])


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    _kernels.warmup()


@pytest.fixture
def grid3_folder():
    return os.path.join(FIXTURES, "grid3")


# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
