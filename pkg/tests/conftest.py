import numpy as np
import pytest

from pointer_anneal.model import SimParams

SEED = 20181107


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def defaults():
    return SimParams(epsilon=0.5, n_qubits=4)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
