import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_probmaps(rng, k, n):
    """Random valid maps via softmax of gaussian fields."""
    z = rng.normal(size=(k, n, n))
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def interior_probmaps(rng, k, n, lo=0.05, hi=0.95):
    """Random maps whose entries stay away from 0 and 1."""
    from pairseg.maps import ProbMaps

    v = random_probmaps(rng, k, n)
    v = np.clip(v, lo, hi)
    v /= v.sum(axis=0, keepdims=True)
    return ProbMaps(v)
