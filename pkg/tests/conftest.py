import numpy as np
import pytest

from anisolp.spectral import make_grid


@pytest.fixture(scope="session")
def grid16():
    return make_grid(16)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(32)


@pytest.fixture(scope="session")
def generic_beta():
    rng = np.random.default_rng(2024)
    b = rng.normal(size=3)
    return b / np.linalg.norm(b)


@pytest.fixture(scope="session")
def e3():
    return np.array([0.0, 0.0, 1.0])
