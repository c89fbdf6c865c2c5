import numpy as np
import pytest
from hypothesis import HealthCheck, settings

MASTER_SEED = 20240514

settings.register_profile(
    "lpu", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("lpu")


@pytest.fixture
def rng():
    return np.random.default_rng(MASTER_SEED)
