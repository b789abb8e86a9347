import numpy as np
import pytest

from germcanop.families import circle_germ, circle_volume_form


@pytest.fixture(scope="session")
def circle():
    """Circle germ of energy 1/2 (radius 1) with its flow-invariant form."""
    g = circle_germ(0.5)
    return g, circle_volume_form(g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
