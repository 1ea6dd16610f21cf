import numpy as np
import pytest

from opnav.config import load_config
from opnav.ephemeris import Body, StateVector

# published 2020-01-20 epoch states (decimal commas normalized)
SC0 = StateVector([-77484699.014, 144753654.801, -7097.387], [-32.392, -15.471, 0.0017])
VENUS0 = StateVector([88620400.317, 62344330.965, -4303824.928], [-19.941, 28.720, 1.544])
EARTH0 = StateVector([-72168239.416, 129721648.698, -1881.250], [-26.540, -14.596, 0.002])
MARS0 = StateVector([-171877932.528, -159110369.541, 849437.731], [17.446, -15.623, -0.755])


@pytest.fixture
def sc0():
    return SC0


@pytest.fixture
def venus():
    return Body("Venus", 0.0, VENUS0)


@pytest.fixture
def earth():
    return Body("Earth", 0.0, EARTH0)


@pytest.fixture
def mars():
    return Body("Mars", 0.0, MARS0)


@pytest.fixture
def planets(venus, earth, mars):
    return [venus, earth, mars]


@pytest.fixture(scope="session")
def three_body_config():
    return load_config("three-body-fix")


@pytest.fixture(scope="session")
def campaign_config():
    return load_config("beacon-campaign")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
