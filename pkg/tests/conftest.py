import numpy as np
import pytest

from srrw.chain import build_srw
from srrw.graph import path_graph


@pytest.fixture
def two_state():
    """``P = [[.5, .5], [.5, .5]]`` with ``mu = (.5, .5)``."""
    return build_srw(path_graph(2)).lazy(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class ConstantUniform:
    """Stand-in generator whose ``random()`` always returns one value."""

    def __init__(self, value=0.0):
        self.value = value

    def random(self, size=None):
        return self.value if size is None else np.full(size, self.value)

    def dirichlet(self, alpha):
        return np.full(len(alpha), 1.0 / len(alpha))
