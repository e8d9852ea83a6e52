import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from svfix.scenario import builtin, example1_base, example2_base

settings.register_profile(
    "svfix", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "svfix"))


@pytest.fixture(scope="session")
def ex1():
    return builtin("example1")


@pytest.fixture(scope="session")
def ex2():
    return builtin("example2")


@pytest.fixture(scope="session")
def t1():
    """Base map of the first builtin, without the diagonal."""
    return example1_base()


@pytest.fixture(scope="session")
def t2():
    return example2_base()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
