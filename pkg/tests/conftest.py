import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fpsi.config import PhysicalParams

settings.register_profile("fpsi", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fpsi")


@pytest.fixture(scope="session")
def params() -> PhysicalParams:
    return PhysicalParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
