"""Modified Bessel functions I0 and I1 of real argument.

Power series up to |x| = 15, Hankel asymptotic expansion beyond. The scaled
variants ``i0e``/``i1e`` return ``exp(-|x|) I(x)`` so that products with
decaying exponentials never overflow.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, vectorize

SERIES_LIMIT = 15.0


@njit(cache=True)
def _series(x, nu):
    # sum_k (x/2)^(2k+nu) / (k! (k+nu)!)
    h = 0.5 * x
    q = h * h
    term = 1.0 if nu == 0 else h
    total = term
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if term <= 1e-17 * total:
            break
    return total


@njit(cache=True)
def _asymptotic_scaled(x, nu):
    # e^{-x} I_nu(x) ~ 1/sqrt(2 pi x) sum_k (-1)^k a_k(nu) / x^k
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    best = 1e300
    k = 0
    while k < 60:
        k += 1
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) >= best:
            break  # divergent tail
        best = abs(term)
        total += term
        if best < 1e-17 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * x)


@njit(cache=True)
def _i_scaled(x, nu):
    ax = abs(x)
    if ax <= SERIES_LIMIT:
        v = _series(ax, nu) * math.exp(-ax)
    else:
        v = _asymptotic_scaled(ax, nu)
    if nu == 1 and x < 0:
        v = -v
    return v


@vectorize(["float64(float64)"], cache=True)
def i0e(x):
    """``exp(-|x|) I0(x)``."""
    return _i_scaled(x, 0)


@vectorize(["float64(float64)"], cache=True)
def i1e(x):
    """``exp(-|x|) I1(x)``."""
    return _i_scaled(x, 1)


def i0(x):
    x = np.asarray(x, dtype=float)
    return i0e(x) * np.exp(np.abs(x))


def i1(x):
    x = np.asarray(x, dtype=float)
    return i1e(x) * np.exp(np.abs(x))
