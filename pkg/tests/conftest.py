import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_edges(rng, n, prob):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < prob
    return np.column_stack([iu[keep], ju[keep]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
