import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchips.errors import DomainError, ValidationError
from switchips.macro import (
    MacroParams,
    boundary_layer,
    cosh_ratio,
    macro_current,
    macro_profile,
    macro_profile_derivative,
    resolvent_kernel,
    resolvent_kernel_expm,
    sinh_ratio,
    total_current,
    uphill,
)
from switchips.model import ReservoirDensities

R2442 = ReservoirDensities(2, 4, 4, 2)
densities = st.floats(0.0, 10.0)
reservoirs = st.builds(ReservoirDensities, densities, densities, densities, densities)


def mp(eps, U=1.0, rho=R2442):
    return MacroParams(eps, U, rho)


@given(st.floats(1e-3, 400.0), st.floats(0.0, 1.0))
def test_sinh_ratio_matches_direct(B, s):
    if B < 300:
        assert math.isclose(float(sinh_ratio(B, s)), math.sinh(B * s) / math.sinh(B), rel_tol=1e-9, abs_tol=1e-300)
        assert math.isclose(float(cosh_ratio(B, s)), math.cosh(B * s) / math.sinh(B), rel_tol=1e-9, abs_tol=1e-300)
    assert np.isfinite(sinh_ratio(B, s)) and np.isfinite(cosh_ratio(B, s))


@given(st.floats(1e-4, 1.0), st.floats(0.05, 20.0), reservoirs)
def test_profile_hits_boundary_values(eps, U, rho):
    r0, r1 = macro_profile(mp(eps, U, rho), [0.0, 1.0])
    assert np.allclose(r0, [rho.rho_L0, rho.rho_R0], atol=1e-10)
    assert np.allclose(r1, [rho.rho_L1, rho.rho_R1], atol=1e-10)


@given(st.floats(1e-3, 1.0), st.floats(0.05, 20.0), reservoirs, st.floats(0.01, 0.99))
def test_profile_solves_stationary_equations(eps, U, rho, y):
    m = mp(eps, U, rho)
    r0, r1 = macro_profile(m, y)
    d0, d1 = macro_profile_derivative(m, y, 2)
    scale = 1.0 + max(rho.as_array()) * (1 + m.B**2)
    assert abs(d0 + U * (r1 - r0)) <= 1e-9 * scale
    assert abs(eps * d1 + U * (r0 - r1)) <= 1e-9 * scale


@given(st.floats(1e-3, 1.0), st.floats(0.05, 20.0), reservoirs)
def test_total_current_constant_in_space(eps, U, rho):
    m = mp(eps, U, rho)
    y = np.linspace(0, 1, 33)
    J0, J1, J = macro_current(m, y)
    assert np.allclose(J0 + J1, total_current(m), atol=1e-8 * (1 + m.B) * (1 + max(rho.as_array())))
    assert np.all(J == total_current(m))


def test_first_derivative_matches_finite_difference():
    m = mp(0.2, 3.0, ReservoirDensities(1, 5, 2, 0))
    y, h = 0.37, 1e-6
    d0, d1 = macro_profile_derivative(m, y, 1)
    p0, p1 = macro_profile(m, y + h)
    q0, q1 = macro_profile(m, y - h)
    assert math.isclose(d0, (p0 - q0) / (2 * h), rel_tol=1e-6)
    assert math.isclose(d1, (p1 - q1) / (2 * h), rel_tol=1e-6)


def test_current_examples():
    assert total_current(mp(1.0)) == 0.0
    assert math.isclose(total_current(mp(1e-3)), -1.998, abs_tol=1e-15)


def test_eps0_profile_follows_fast_line():
    r0, r1 = macro_profile(mp(0.0), [0.0, 0.5, 1.0])
    assert np.allclose(r0, [2, 3, 4])
    assert np.allclose(r1, [4, 3, 2])


def test_profile_domain():
    with pytest.raises(DomainError):
        macro_profile(mp(0.5), [1.5])


@pytest.mark.parametrize("eps, verdict", [(0.25, "uphill"), (0.5, "boundary"), (0.75, "downhill")])
def test_uphill_transition(eps, verdict):
    v = uphill(mp(eps, rho=ReservoirDensities(2, 6, 4, 2)))
    assert v.verdict == verdict
    assert v.critical_epsilon == 0.5


def test_uphill_without_crossing():
    v = uphill(mp(0.3, rho=ReservoirDensities(1, 1, 2, 3)))
    assert v.verdict == "downhill" and v.critical_epsilon is None


@given(st.floats(1e-8, 0.5), st.floats(0.1, 10.0), st.floats(0.1, 5.0))
def test_boundary_layer_mirror(eps, U, W):
    left = boundary_layer(mp(eps, U, ReservoirDensities(W, 0, 1, 1)), side="left")
    right = boundary_layer(mp(eps, U, ReservoirDensities(1, 1, W, 0)), side="right")
    assert abs(left.ratio - right.ratio) <= 1e-12 * max(1.0, abs(left.ratio))
    assert math.isclose(left.position, 1.0 - right.position, abs_tol=1e-12)


def test_boundary_layer_threshold_is_met_at_edge():
    m = mp(1e-4, 2.0, ReservoirDensities(2, 0, 1, 1))
    bl = boundary_layer(m)
    _, d1 = macro_profile_derivative(m, [bl.position], 2)
    assert math.isclose(abs(float(d1[0])), 1.0, rel_tol=1e-6)


def test_boundary_layer_needs_discontinuity():
    with pytest.raises(DomainError):
        boundary_layer(mp(0.1, rho=ReservoirDensities(1, 1, 3, 3)))
    with pytest.raises(DomainError):
        boundary_layer(mp(0.0))


def test_macro_params_validation():
    with pytest.raises(ValidationError):
        MacroParams(1.5, 1.0)
    with pytest.raises(ValidationError):
        MacroParams(0.5, 0.0)


def test_resolvent_eps0_at_time_zero():
    assert np.allclose(resolvent_kernel(0.0, 1.0, 1.0, 0.0), [[1.0, 0.5], [0.5, 0.25]], atol=1e-15)


def test_resolvent_symmetric_at_eps1():
    K = resolvent_kernel(1.0, 2.0, 0.7, 0.3)
    assert math.isclose(K[0, 0], K[1, 1], rel_tol=1e-13)
    assert K[0, 1] == K[1, 0]


@given(st.floats(1e-3, 1.0), st.floats(0.05, 10.0), st.floats(0.05, 10.0), st.floats(0.0, 3.0))
def test_resolvent_matches_expm(eps, U, lam, t):
    K = resolvent_kernel(eps, U, lam, t)
    ref = resolvent_kernel_expm(eps, U, lam, t)
    assert np.max(np.abs(K - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_resolvent_continuity_at_small_eps():
    a = resolvent_kernel(1e-8, 1.0, 1.0, 0.5)
    b = resolvent_kernel(0.0, 1.0, 1.0, 0.5)
    # the (1,1) slow-layer entry carries a 1/eps transient only at t = 0
    assert np.max(np.abs(a - b)) <= 1e-4


def test_resolvent_domain():
    with pytest.raises(DomainError):
        resolvent_kernel(0.5, 1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        resolvent_kernel(0.5, 1.0, 1.0, -1.0)
