import numpy as np
import pytest

from tamen import tt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_operator(dims, rank, rng, dtype=float):
    """Random operator train with square cores of the given mode sizes."""
    v = tt.random_tt([n * n for n in dims], rank, rng, dtype)
    return tt.TTOperator([c.reshape(c.shape[0], n, n, c.shape[2]) for c, n in zip(v.cores, dims)])


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)
