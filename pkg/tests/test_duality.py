import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchips.duality import (
    DualityPairing,
    check_self_duality,
    duality_function,
    duality_values,
    median_of_means,
)
from switchips.errors import ValidationError
from switchips.model import Configuration, DualConfiguration, make_stream

from conftest import make_params


def test_empty_dual_gives_one():
    p = make_params(n=3)
    xi = DualConfiguration(np.zeros((3, 2), int), np.zeros((2, 2), int))
    assert duality_function(xi, Configuration(np.array([[1, 2], [0, 0], [5, 1]])), p) == 1.0


def test_single_dual_particle_reads_occupation():
    p = make_params(n=3)
    eta = Configuration(np.array([[1, 2], [7, 0], [5, 1]]))
    assert duality_function(DualConfiguration.single(3, 2, 0), eta, p) == 7.0


def test_absorbed_particle_reads_reservoir():
    p = make_params(n=3, rho=(2, 4, 4, 2))
    xi = DualConfiguration(np.zeros((3, 2), int), np.array([[0, 1], [0, 0]]))
    assert duality_function(xi, Configuration.empty(3), p) == 4.0


@given(st.sampled_from([-1, 0, 1]), st.integers(0, 2**31 - 1))
def test_vectorised_matches_scalar(sigma, seed):
    rng = np.random.default_rng(seed)
    rho = (0.3, 0.8, 0.6, 0.1) if sigma == -1 else (2, 4, 4, 2)
    p = make_params(sigma=sigma, n=4, rho=rho)
    hi = 2 if sigma == -1 else 4
    eta = rng.integers(0, hi, size=(4, 2))
    bulk = rng.integers(0, hi, size=(4, 2))
    absd = rng.integers(0, 3, size=(2, 2))
    ref = duality_function(DualConfiguration(bulk, absd), Configuration(eta), p)
    vec = duality_values(bulk[None], absd[None], eta[None], p)
    assert np.isclose(vec[0], ref, rtol=1e-13)


def test_median_of_means_constant_sample():
    m, se = median_of_means(np.full(100, 2.5))
    assert m == 2.5 and se == 0.0


def test_identity_holds_trivially_at_time_zero():
    p = make_params(n=4)
    pair = DualityPairing(Configuration(np.array([[1, 0], [2, 1], [0, 0], [3, 1]])),
                          DualConfiguration.single(4, 2, 0, 2), 0.0, 2000)
    rep = check_self_duality(pair, p, make_stream(0))
    assert rep.diff == 0.0 and rep.passed
    assert rep.to_dict()["pass"] is True


@pytest.mark.parametrize("sigma", [-1, 0, 1])
def test_identity_open_chain(sigma):
    rho = (0.3, 0.8, 0.6, 0.1) if sigma == -1 else (2, 4, 4, 2)
    p = make_params(sigma=sigma, n=3, eps=0.5, rho=rho)
    eta = Configuration(np.array([[1, 0], [0, 1], [1, 1]]))
    pair = DualityPairing(eta, DualConfiguration.single(3, 1, 0), 1.0, 20_000)
    assert check_self_duality(pair, p, make_stream(5, sigma + 1)).passed


def test_torus_rejects_absorbed_dual():
    p = make_params(n=3, mode="bulk-torus")
    xi = DualConfiguration(np.zeros((3, 2), int), np.array([[1, 0], [0, 0]]))
    with pytest.raises(ValidationError):
        check_self_duality(DualityPairing(Configuration.empty(3), xi, 1.0, 1000), p, make_stream(0))


def test_replica_floor():
    p = make_params(n=3)
    with pytest.raises(ValidationError):
        check_self_duality(DualityPairing(Configuration.empty(3), DualConfiguration.single(3, 1, 0), 1.0, 10),
                           p, make_stream(0))
