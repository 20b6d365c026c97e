"""Monte Carlo evaluation of the stationary profile through the switching
diffusion: a particle diffuses with diffusivity 1 on layer 0 and ``eps`` on
layer 1, changes layer at rate ``U`` and is paid the reservoir density of its
current layer at the end it exits through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ValidationError
from .macro import MacroParams


@dataclass(frozen=True)
class FKEstimate:
    y: float
    layer: int
    mean: float
    se: float
    replicas: int
    dt: float

    def within(self, value: float, k: float = 4.0) -> bool:
        return abs(self.mean - value) <= k * self.se


@njit(cache=True)
def _fk_kernel(y0, i0, eps, U, rho, n_rep, dt, rng):
    # rho in (L0, L1, R0, R1) order
    s = 0.0
    s2 = 0.0
    sd0 = math.sqrt(2.0 * dt)
    for _ in range(n_rep):
        x = y0
        i = i0
        tsw = rng.standard_exponential() / U
        while True:
            h = dt if tsw > dt else tsw
            if i == 0:
                sd = sd0 if h == dt else math.sqrt(2.0 * h)
            else:
                sd = math.sqrt(2.0 * eps * h)
            x += sd * rng.standard_normal()
            tsw -= h
            if x <= 0.0:
                pay = rho[i]
                break
            if x >= 1.0:
                pay = rho[2 + i]
                break
            if tsw <= 0.0:
                i = 1 - i
                tsw = rng.standard_exponential() / U
        s += pay
        s2 += pay * pay
    return s, s2


def feynman_kac_stationary(
    mp: MacroParams, y: float, layer: int, replicas: int, dt: float, rng: np.random.Generator
) -> FKEstimate:
    """Estimate ``rho_layer(y)`` of the stationary profile with its standard error.

    Euler stepping of the diffusion, exact exponential switching clocks. The
    exit is detected only at grid times, which biases the estimate by
    ``O(sqrt(dt))``.
    """
    if not (0.0 < y < 1.0):
        raise ValidationError("y must lie strictly inside (0, 1)")
    if layer not in (0, 1):
        raise ValidationError("layer must be 0 or 1")
    if replicas < 1000:
        raise ValidationError("need at least 1000 replicas")
    if not (0 < dt <= 1e-4):
        raise ValidationError("dt must lie in (0, 1e-4]")
    rho = mp.rho.astype(float)
    s, s2 = _fk_kernel(float(y), int(layer), float(mp.epsilon), float(mp.upsilon), rho, int(replicas), float(dt), rng)
    mean = s / replicas
    var = max(s2 / replicas - mean * mean, 0.0) * replicas / (replicas - 1)
    return FKEstimate(float(y), int(layer), mean, math.sqrt(var / replicas), int(replicas), float(dt))
