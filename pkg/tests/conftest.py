import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hidden_sir import ChainSpec, EpidemicParams, IncidenceModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def ex1():
    return (EpidemicParams(0.5, 1.0, 2.0, 1.0, 0.5),
            IncidenceModel.example({0.0: 0.1, 1.0: 4.0}, 0.1),
            ChainSpec.two_state(5.0, 25.0))


@pytest.fixture
def ex2():
    return (EpidemicParams(10.0, 1.0, 3.0, 1.0, 1.0),
            IncidenceModel.example({0.0: 0.1, 1.0: 2.0}, 0.1),
            ChainSpec.two_state(10.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
