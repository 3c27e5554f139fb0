import numpy as np
import pytest

from gsbdyn.channels import DensityBlock
from gsbdyn.spectral import Flat, Lorentzian, ModelSpec


def qubit_model(form_factor) -> ModelSpec:
    return ModelSpec(
        n=1, r=1, H_e=np.zeros((1, 1)), betas=np.array([[1.0]]),
        form_factors=(form_factor,),
    )


def matrix_unit(dim: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((dim, dim), dtype=complex)
    E[i, j] = 1.0
    return E


def flip_operator(n: int) -> np.ndarray:
    """sigma_x-like swap between the first excited level and the ground."""
    X = np.zeros((n + 1, n + 1), dtype=complex)
    X[0, n] = X[n, 0] = 1.0
    return X


def pure_block(vec) -> DensityBlock:
    vec = np.asarray(vec, dtype=complex)
    return DensityBlock.from_matrix(np.outer(vec, vec.conj()))


@pytest.fixture
def flat_qubit() -> ModelSpec:
    return qubit_model(Flat(gamma=1.0))


@pytest.fixture
def lorentzian_qubit() -> ModelSpec:
    return qubit_model(Lorentzian(gamma=1.0, lam=1.0))


@pytest.fixture
def excited_state() -> DensityBlock:
    return pure_block([1.0, 0.0])


@pytest.fixture
def ground_state() -> DensityBlock:
    return pure_block([0.0, 1.0])
