import numpy as np
import pytest

from nhcontrol.hamiltonians import build_cell_operators, load_default_params
from nhcontrol.synthesis import find_identity_sequence


@pytest.fixture(scope="session")
def params():
    return load_default_params()


@pytest.fixture(scope="session")
def ops(params):
    return build_cell_operators(params)


@pytest.fixture(scope="session")
def base_seq(ops, params):
    """Identity-root sequence for seed 0, shared across modules."""
    return find_identity_sequence(ops, seed=0, T=params.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, n=8, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, n=8):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))
