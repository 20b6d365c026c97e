import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchips.errors import SingularError
from switchips.stationary import (
    absorption_closed,
    absorption_closed_eps0,
    absorption_dense,
    absorption_linear,
    boundary_matrix,
    c_vectors,
    micro_profile,
    roots,
)

from conftest import make_params


def test_eps0_three_sites_exact():
    p = make_params(n=3, eps=0.0, gamma=1.0)
    rows = absorption_closed_eps0(p)
    assert np.allclose(rows.p[0], np.array([8, 4, 2, 1]) / 15, atol=1e-14)
    assert math.isclose(micro_profile(p).J, -0.2, abs_tol=1e-14)


def test_eps0_routes_through_closed():
    p = make_params(n=7, eps=0.0, gamma=0.3)
    assert np.allclose(absorption_closed(p).p, absorption_closed_eps0(p).p)


@given(st.integers(1, 120), st.floats(1e-3, 20.0), st.sampled_from([0.0, 1e-4, 0.01, 0.3, 0.77, 1.0]))
def test_closed_matches_linear(n, gamma, eps):
    p = make_params(n=n, eps=eps, gamma=gamma)
    a, b = absorption_closed(p), absorption_linear(p)
    assert np.max(np.abs(a.p - b.p)) < 1e-9
    assert np.max(np.abs(a.q - b.q)) < 1e-9


@given(st.integers(1, 40), st.floats(1e-2, 10.0), st.floats(0.0, 1.0))
def test_linear_matches_lapack(n, gamma, eps):
    p = make_params(n=n, eps=eps, gamma=gamma)
    a, b = absorption_linear(p), absorption_dense(p)
    assert np.max(np.abs(a.p - b.p)) < 1e-10 and np.max(np.abs(a.q - b.q)) < 1e-10


@given(st.integers(1, 80), st.floats(1e-2, 10.0), st.floats(0.0, 1.0))
def test_rows_are_probabilities(n, gamma, eps):
    rows = absorption_closed(make_params(n=n, eps=eps, gamma=gamma))
    for m in (rows.p, rows.q):
        assert np.all(m >= -1e-13)
        assert np.allclose(m.sum(axis=1), 1.0, atol=1e-12)


@given(st.integers(2, 60), st.floats(1e-2, 5.0), st.floats(0.0, 1.0),
       st.lists(st.floats(0.0, 10.0), min_size=4, max_size=4))
def test_profile_in_hull_and_current_constant(n, gamma, eps, rho):
    prof = micro_profile(make_params(n=n, eps=eps, gamma=gamma, rho=rho))
    lo, hi = min(rho), max(rho)
    for th in (prof.theta0, prof.theta1):
        assert np.all(th >= lo - 1e-10) and np.all(th <= hi + 1e-10)
    assert np.allclose(prof.total_current_per_bond, prof.J, atol=1e-10)


def test_left_right_mirror():
    p = make_params(n=9, eps=0.4, gamma=0.5, rho=(1, 2, 5, 3))
    q = p.with_(reservoir=p.reservoir.swapped_sides())
    a, b = micro_profile(p), micro_profile(q)
    assert np.allclose(a.theta0, b.theta0[::-1]) and np.allclose(a.theta1, b.theta1[::-1])
    assert math.isclose(a.J, -b.J, abs_tol=1e-12)


def test_linear_method_agrees():
    p = make_params(n=30, eps=0.2, gamma=0.05)
    a, b = micro_profile(p), micro_profile(p, method="linear")
    assert np.allclose(a.theta0, b.theta0, atol=1e-11)
    assert math.isclose(a.J, b.J, abs_tol=1e-11)


@given(st.floats(1e-6, 1.0), st.floats(1e-8, 100.0))
def test_roots_are_reciprocal_solutions(eps, gamma):
    r = roots(eps, gamma)
    assert math.isclose(r.alpha1 * r.alpha2, 1.0, rel_tol=1e-12)
    assert 0 < r.alpha1 <= 1 <= r.alpha2
    assert math.isclose(r.alpha1 - 1.0, r.alpha1_minus_1, rel_tol=1e-6, abs_tol=1e-15)


@pytest.mark.parametrize("eps", [0.01, 0.5, 1.0])
@pytest.mark.parametrize("n", [1, 2, 7, 50])
def test_boundary_matrix_inverse(eps, n):
    cv = c_vectors(make_params(n=n, eps=eps, gamma=1.0))
    assert np.allclose(boundary_matrix(n, eps, 1.0) @ cv.matrix(), np.eye(4), atol=1e-8)


def test_huge_chain_finite():
    p = make_params(n=10**6, eps=0.5, upsilon=1.0)
    prof = micro_profile(p)
    assert np.all(np.isfinite(prof.theta0)) and math.isfinite(prof.J)
    # N J approaches the continuum current -(a0 + eps a1) = -(2 - 1)
    assert math.isclose(p.n_sites * prof.J, -1.0, rel_tol=1e-4)


def test_zero_switching_is_singular():
    p = make_params(n=4, gamma=1e-300)
    p = p.with_(gamma=0.0)
    with pytest.raises(Exception):
        absorption_linear(p)


def test_singular_error_type():
    assert issubclass(SingularError, ArithmeticError)
