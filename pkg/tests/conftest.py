import numpy as np
import pytest
from hypothesis import settings

from desatlqr.linear_plant import sample_plant
from desatlqr.lqr_core import periodic_riccati
from desatlqr.orbit_env import OrbitEnvironment, SpacecraftParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def env():
    return OrbitEnvironment()


@pytest.fixture(scope="session")
def params():
    return SpacecraftParams()


@pytest.fixture(scope="session")
def ref_plant(env, params):
    return sample_plant(params, env, p=100)


@pytest.fixture(scope="session")
def ref_schedule(ref_plant):
    return periodic_riccati(ref_plant)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
