import numpy as np
import pytest

from freqdiv.algebra import HilbertSpace


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_matrix(rng, n, scale=1.0):
    return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


def random_density(rng, n):
    m = random_matrix(rng, n)
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def small_space():
    return HilbertSpace((2, 2, 3, 3, 3))
