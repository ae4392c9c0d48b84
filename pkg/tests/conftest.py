import numpy as np
import pytest

from shadowprice import Formulation, solve

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def solutions():
    return {v: solve(v) for v in Formulation}


@pytest.fixture(scope="session")
def base_solution(solutions):
    return solutions[Formulation.BASE]


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
