import os

import numpy as np
import pytest

from gwperc import make_spec

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def uniform3():
    return make_spec({"kind": "explicit", "pmf": {"1": 1 / 3, "2": 1 / 3, "3": 1 / 3}})


@pytest.fixture(scope="session")
def mu12():
    return make_spec({"kind": "explicit", "pmf": {"1": 0.8, "2": 0.2}})


@pytest.fixture(scope="session")
def binary():
    return make_spec({"kind": "explicit", "pmf": {"2": 1.0}})


@pytest.fixture(scope="session")
def zeta15():
    return make_spec({"kind": "zeta_tail", "alpha": 1.5})


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pytest_configure(config):
    os.environ.pop("GWPERC_SEED", None)
