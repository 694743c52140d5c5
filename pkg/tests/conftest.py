import numpy as np
import pytest

from currentlab.harness.corpus import random_connected_graph
from currentlab.mc.rng import stream


@pytest.fixture
def graph_factory():
    """Seeded factory for small random ferromagnetic graphs."""

    def make(seed: int, n_min: int = 2, n_max: int = 6, max_edges: int = 8):
        return random_connected_graph(stream(777, seed), n_min=n_min,
                                      n_max=n_max, max_edges=max_edges)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20210)
