import numpy as np
import pytest

from fchc.acceptance import desk_model
from fchc.potentials import Regular, zero_potential

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_regular():
    """Neumann A and B, regular potential, 32 nodes and 32 steps."""
    return desk_model(potential=Regular(), n=32, steps=32)


@pytest.fixture(scope="session")
def small_linear():
    return desk_model(potential=zero_potential(), n=32, steps=32)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
