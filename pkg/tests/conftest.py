import numpy as np
import pytest

from ergokit.analysis import random_instance


@pytest.fixture
def two_state():
    """Rates 0 -> 1 at 1 and 1 -> 0 at 2; every quantity has a closed form."""
    return np.array([[-1.0, 1.0], [2.0, -2.0]])


@pytest.fixture
def instances():
    rng = np.random.default_rng(20240917)
    return [random_instance(rng, int(rng.integers(2, 9))) for _ in range(20)]
