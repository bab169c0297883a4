import numpy as np
import pytest

from ktcy.field import GridSpec


@pytest.fixture
def grid8():
    return GridSpec(8, 8, 8)


@pytest.fixture
def grid16():
    return GridSpec(16, 16, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
