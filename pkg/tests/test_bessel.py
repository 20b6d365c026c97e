import numpy as np
import scipy.special as sp
from hypothesis import given
from hypothesis import strategies as st

from switchips.bessel import SERIES_LIMIT, i0, i0e, i1, i1e


def test_scaled_against_scipy_on_wide_grid():
    x = np.concatenate([np.linspace(-40, 40, 4001), np.geomspace(1e-8, 1e5, 500)])
    assert np.max(np.abs(i0e(x) / sp.i0e(x) - 1)) < 1e-13
    nz = x != 0
    assert np.max(np.abs(i1e(x[nz]) / sp.i1e(x[nz]) - 1)) < 1e-13


def test_unscaled_values():
    x = np.array([0.0, 0.5, 3.0, 14.9, 15.1, 50.0])
    assert np.allclose(i0(x), sp.i0(x), rtol=1e-13, atol=0)
    assert np.allclose(i1(x), sp.i1(x), rtol=1e-13, atol=0)


def test_switchover_is_continuous():
    lo, hi = np.nextafter(SERIES_LIMIT, 0), np.nextafter(SERIES_LIMIT, 100)
    assert abs(i0e(lo) / i0e(hi) - 1) < 1e-13
    assert abs(i1e(lo) / i1e(hi) - 1) < 1e-13


@given(st.floats(-700, 700))
def test_parity(x):
    assert i0e(x) == i0e(-x)
    assert i1e(x) == -i1e(-x)


def test_origin():
    assert i0e(0.0) == 1.0 and i1e(0.0) == 0.0
