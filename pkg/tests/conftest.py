import numpy as np
import pytest

from wgelast import Scheme, WeakSpace, generate_uniform_triangles

SCHEMES = [Scheme(1, "rm"), Scheme(1, "p"), Scheme(2, "p")]


@pytest.fixture(scope="session")
def spaces():
    """Cached weak spaces keyed by (n, k, variant)."""
    cache = {}

    def get(n, k=1, variant="rm"):
        key = (n, k, variant)
        if key not in cache:
            cache[key] = WeakSpace(generate_uniform_triangles(n), Scheme(k, variant))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def reference_triangle():
    from wgelast import build_mesh
    return build_mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), [[0, 1, 2]])
