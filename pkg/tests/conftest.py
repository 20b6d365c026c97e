import numpy as np
import pytest
from hypothesis import settings

from switchips.model import ModelParams, ReservoirDensities

# jit compilation makes first calls slow; timing is not what these tests check
settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def make_params(sigma=0, eps=0.5, n=5, gamma=1.0, rho=(2.0, 4.0, 4.0, 2.0), mode="boundary-driven", upsilon=None):
    if upsilon is not None:
        gamma = None
    return ModelParams(sigma=sigma, epsilon=eps, n_sites=n, reservoir=ReservoirDensities.from_sequence(rho),
                       gamma=gamma, upsilon=upsilon, mode=mode)


@pytest.fixture
def params_factory():
    return make_params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
