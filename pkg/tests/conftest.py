import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ktsynth.dataset import FixtureConfig, make_fixture

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_fixture():
    """80 students, short paths; fast enough for per-test training."""
    return make_fixture(FixtureConfig(n_students=80, path_length_range=(6, 16), seed=424))


@pytest.fixture(scope="session")
def default_fixture():
    """The full bundled stand-in dataset (500 students)."""
    return make_fixture(FixtureConfig())


@pytest.fixture()
def rng():
    return np.random.default_rng(987654321)
