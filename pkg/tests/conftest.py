import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, count, n, lo=0.2, hi=3.0, spread=2.0):
    x = np.empty((count, n))
    x[:, :-1] = rng.uniform(-spread, spread, size=(count, n - 1))
    x[:, -1] = rng.uniform(lo, hi, size=count)
    return x
