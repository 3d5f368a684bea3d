import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radproj.measures import build_cantor_measure, four_corner_spec, full_grid_spec

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def four_corner5():
    return build_cantor_measure(four_corner_spec(5))


@pytest.fixture(scope="session")
def four_corner6():
    return build_cantor_measure(four_corner_spec(6))


@pytest.fixture(scope="session")
def grid8():
    return build_cantor_measure(full_grid_spec(2, 2, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
