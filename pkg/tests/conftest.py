import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "affleg",
    max_examples=15,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("affleg")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
