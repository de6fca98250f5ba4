import numpy as np
import pytest

from dulab.qinfo import DensityMatrix, PureState


def random_density(dims, rank=None, seed=0):
    """Ginibre-induced random density matrix of the given rank."""
    rng = np.random.default_rng(seed)
    d = int(np.prod(dims))
    r = d if rank is None else rank
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, dims)


def random_pure(dims, seed=0):
    rng = np.random.default_rng(seed)
    d = int(np.prod(dims))
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState(v / np.linalg.norm(v), dims)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
