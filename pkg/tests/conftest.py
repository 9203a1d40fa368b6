import time

import numpy as np
import pytest
from hypothesis import settings

from ettrack.cli import frozen_variant
from ettrack.scenarios import builtin_scenario
from ettrack.sim import run

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case1():
    return builtin_scenario("case1")


@pytest.fixture(scope="session")
def case2():
    return builtin_scenario("case2")


@pytest.fixture(scope="session")
def case1_timed(case1):
    start = time.perf_counter()
    result = run(case1)
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def case1_run(case1_timed):
    return case1_timed[0]


@pytest.fixture(scope="session")
def case1_frozen_run(case1):
    return run(frozen_variant(case1))


@pytest.fixture(scope="session")
def case2_run(case2):
    return run(case2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
