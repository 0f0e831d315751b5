import numpy as np
import pytest

from solring.grid import Grid1D


@pytest.fixture(scope="session")
def ring512():
    return Grid1D.ring(512, 1.0)


@pytest.fixture(scope="session")
def line_grid():
    return Grid1D.line(1 << 12, 40.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
