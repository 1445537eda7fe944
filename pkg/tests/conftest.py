import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_linear(x, w):
    """Triple loop reference for ``x @ w``."""
    n, c = x.shape
    out = np.zeros((n, w.shape[1]))
    for i in range(n):
        for j in range(w.shape[1]):
            for k in range(c):
                out[i, j] += x[i, k] * w[k, j]
    return out
