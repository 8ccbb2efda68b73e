import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# numba compiles on first call, so the first example of a property can be slow
settings.register_profile("rstre", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("rstre")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle_112():
    """Triangle with conductances (1, 1, 2) on edges (0,1), (0,2), (1,2)."""
    from rstre.graph_env import graph_from_edges

    return graph_from_edges(3, [(0, 1), (0, 2), (1, 2)], [0.0, 0.0, np.log(2.0)])
