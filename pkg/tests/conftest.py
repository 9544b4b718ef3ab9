import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def random_similarity(gen, n):
    """Symmetric matrix with unit diagonal and off-diagonal entries in [-1, 1]."""
    s = gen.uniform(-1.0, 1.0, size=(n, n))
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 1.0)
    return s


def random_assignment(gen, n, k):
    a = gen.random((n, k)) + 1e-3
    return a / a.sum(axis=1, keepdims=True)


@pytest.fixture
def gen():
    return np.random.default_rng(1234)
