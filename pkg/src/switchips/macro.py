"""Closed-form macroscopic quantities of the double-diffusivity system

    d/dt rho0 = rho0'' + U (rho1 - rho0),   d/dt rho1 = eps rho1'' + U (rho0 - rho1)

on [0, 1] with Dirichlet data from the four reservoirs: stationary profiles,
currents, uphill classification, boundary-layer widths and the resolvent
kernel of the whole-line problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .model import ModelParams, ReservoirDensities

_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class MacroParams:
    epsilon: float
    upsilon: float
    reservoir: ReservoirDensities = ReservoirDensities()

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValidationError(f"epsilon must lie in [0,1] (got {self.epsilon})")
        if not (math.isfinite(self.upsilon) and self.upsilon > 0):
            raise ValidationError(f"upsilon must be positive (got {self.upsilon})")
        for v in self.reservoir.as_array():
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError("reservoir densities must be finite and >= 0")

    @classmethod
    def from_model(cls, params: ModelParams) -> "MacroParams":
        return cls(params.epsilon, params.macro_rate, params.reservoir)

    @property
    def rho(self) -> np.ndarray:
        return self.reservoir.as_array()

    @property
    def B(self) -> float:
        """Decay rate of the layer difference, ``sqrt(U (1 + 1/eps))``."""
        if self.epsilon == 0:
            return math.inf
        return math.sqrt(self.upsilon * (1.0 + 1.0 / self.epsilon))

    @property
    def a0(self) -> float:
        return self.reservoir.rho_R0 - self.reservoir.rho_L0

    @property
    def a1(self) -> float:
        return self.reservoir.rho_R1 - self.reservoir.rho_L1


# --------------------------------------------------------------------------
# hyperbolic ratios in exponential form (safe for large B)


def sinh_ratio(B: float, s) -> np.ndarray:
    """``sinh(B s) / sinh(B)`` for ``s`` in [0, 1]."""
    s = np.asarray(s, dtype=float)
    # e^{-B(1-s)} (1 - e^{-2Bs}) / (1 - e^{-2B})
    return np.exp(-B * (1.0 - s)) * np.expm1(-2.0 * B * s) / math.expm1(-2.0 * B)


def cosh_ratio(B: float, s) -> np.ndarray:
    """``cosh(B s) / sinh(B)`` for ``s`` in [0, 1]."""
    s = np.asarray(s, dtype=float)
    return np.exp(-B * (1.0 - s)) * (1.0 + np.exp(-2.0 * B * s)) / (-math.expm1(-2.0 * B))


# --------------------------------------------------------------------------
# stationary profile and currents


def _linear_part(mp: MacroParams, y):
    r = mp.reservoir
    e = mp.epsilon
    return ((r.rho_R0 * y + r.rho_L0 * (1 - y)) + e * (r.rho_R1 * y + r.rho_L1 * (1 - y))) / (1 + e)


def macro_profile(mp: MacroParams, y) -> tuple[np.ndarray, np.ndarray]:
    """Stationary densities ``(rho0(y), rho1(y))``.

    For a frozen slow layer both densities follow the fast-layer line inside
    the interval and take their own boundary values at the end points.
    """
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise DomainError("y must lie in [0, 1]")
    r = mp.reservoir
    e = mp.epsilon
    if e == 0:
        rho0 = r.rho_L0 + mp.a0 * y
        rho1 = np.where(y == 0, r.rho_L1, np.where(y == 1, r.rho_R1, rho0))
        return rho0, rho1
    B = mp.B
    sl = sinh_ratio(B, 1.0 - y)
    sr = sinh_ratio(B, y)
    wl = r.rho_L0 - r.rho_L1
    wr = r.rho_R0 - r.rho_R1
    lin = _linear_part(mp, y)
    rho0 = e / (1 + e) * (sl * wl + sr * wr) + lin
    rho1 = -1.0 / (1 + e) * (sl * wl + sr * wr) + lin
    return rho0, rho1


def macro_profile_derivative(mp: MacroParams, y, order: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Exact first or second derivative of the stationary densities."""
    y = np.asarray(y, dtype=float)
    r = mp.reservoir
    e = mp.epsilon
    if e == 0:
        if order == 1:
            d = np.full_like(y, mp.a0)
        else:
            d = np.zeros_like(y)
        return d, d.copy()
    B = mp.B
    wl = r.rho_L0 - r.rho_L1
    wr = r.rho_R0 - r.rho_R1
    if order == 1:
        hyp = B * (-cosh_ratio(B, 1.0 - y) * wl + cosh_ratio(B, y) * wr)
        lin = (mp.a0 + e * mp.a1) / (1 + e)
    elif order == 2:
        hyp = B * B * (sinh_ratio(B, 1.0 - y) * wl + sinh_ratio(B, y) * wr)
        lin = 0.0
    else:
        raise ValueError("order must be 1 or 2")
    return e / (1 + e) * hyp + lin, -1.0 / (1 + e) * hyp + lin


def macro_current(mp: MacroParams, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Layer currents ``J0 = -rho0'``, ``J1 = -eps rho1'`` and their sum."""
    y = np.asarray(y, dtype=float)
    e = mp.epsilon
    d0, d1 = macro_profile_derivative(mp, y, 1)
    J0 = -d0
    J1 = -e * d1
    # the hyperbolic parts cancel identically in the sum
    J = np.full_like(J0, total_current(mp))
    return J0, J1, J


def total_current(mp: MacroParams) -> float:
    return -(mp.a0 + mp.epsilon * mp.a1) + 0.0  # no negative zero


# --------------------------------------------------------------------------
# uphill classification


@dataclass(frozen=True)
class UphillVerdict:
    a0: float
    a1: float
    J: float
    gap: float
    verdict: str
    critical_epsilon: float | None


def uphill(mp: MacroParams) -> UphillVerdict:
    """Classify the stationary flow against the total-density gradient.

    Uphill means the total current and the total density gap
    ``(rho_R0 + rho_R1) - (rho_L0 + rho_L1)`` share a sign, equivalently
    ``(a0 + a1)(a0 + eps a1) < 0``.
    """
    a0, a1 = mp.a0, mp.a1
    J = total_current(mp)
    gap = a0 + a1
    crit = (a0 + a1) * (a0 + mp.epsilon * a1)
    if crit < 0:
        verdict = "uphill"
    elif crit > 0:
        verdict = "downhill"
    else:
        verdict = "boundary"
    eps_star = -a0 / a1 if a0 * a1 < 0 else None
    return UphillVerdict(a0, a1, J, gap, verdict, eps_star)


# --------------------------------------------------------------------------
# boundary layer


@dataclass(frozen=True)
class BoundaryLayer:
    side: str
    position: float
    width: float
    ratio: float


def _asinh_scaled(logC: float, B: float) -> float:
    """``asinh(C sinh(B))`` given ``log C``, without overflow."""
    if B < 300.0:
        return math.asinh(math.exp(logC) * math.sinh(B))
    # log z with z = C sinh B = C e^B (1 - e^{-2B}) / 2
    logz = logC + B + math.log1p(-math.exp(-2.0 * B)) - _LOG2
    if logz > 20.0:
        return logz + math.log1p(math.sqrt(1.0 + math.exp(-2.0 * logz)))
    return math.asinh(math.exp(logz))


def boundary_layer(mp: MacroParams, c: float = 1.0, side: str = "left") -> BoundaryLayer:
    """Width of the region next to an end where ``|rho1''| >= c``.

    The left edge is the supremum of such points in (0, 1/2) and the right
    edge the infimum in (1/2, 1); the width is measured from the respective
    end and also reported divided by ``sqrt(eps) log(1/eps)``.
    """
    e = mp.epsilon
    if not (e > 0):
        raise DomainError("boundary layers need epsilon > 0")
    if not (c > 0):
        raise DomainError("threshold c must be positive")
    r = mp.reservoir
    WL = abs(r.rho_L0 - r.rho_L1)
    WR = abs(r.rho_R0 - r.rho_R1)
    if WL == 0 and WR == 0:
        raise DomainError("no boundary layer: both end discontinuities vanish")
    W = WL if side == "left" else WR
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if W == 0:
        raise DomainError(f"no {side} boundary layer: its discontinuity vanishes")
    B = mp.B
    # |rho1 - rho0| = W sinh(B s)/sinh(B) against c eps / U, s = distance to the far end
    logC = math.log(c * e / (mp.upsilon * W))
    s = _asinh_scaled(logC, B) / B
    width = min(max(1.0 - s, 0.0), 0.5)
    position = width if side == "left" else 1.0 - width
    scale = math.sqrt(e) * math.log(1.0 / e) if e < 1 else math.nan
    return BoundaryLayer(side, position, width, width / scale)


# --------------------------------------------------------------------------
# resolvent kernel


def resolvent_kernel(eps: float, upsilon: float, lam: float, t: float) -> np.ndarray:
    """``exp(t P^{-1}(A - lam I)) P^{-1}`` with ``P = diag(1, eps)`` and ``A``
    the switching matrix; for ``eps = 0`` the singular-limit kernel.

    Evaluated through the two decay rates so that no cosh/sinh overflows.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if t < 0:
        raise DomainError("t must be non-negative")
    U = float(upsilon)
    if eps == 0:
        r = U / (U + lam)
        pref = math.exp(-lam * (2 * U + lam) * t / (U + lam))
        return pref * np.array([[1.0, r], [r, r * r]])
    ell = 0.5 * (U + lam)
    a = (1 + eps) * ell / eps
    k = (1 - eps) * ell / eps
    c = math.sqrt(k * k + U * U / eps)
    # eigenvalues -a + c (slow) and -a - c (fast); a - c = lam(2U+lam)/(eps(a+c))
    slow = -lam * (2 * U + lam) / (eps * (a + c))
    fast = -(a + c)
    es = math.exp(slow * t)
    ef = math.exp(fast * t)
    ch = 0.5 * (es + ef)  # e^{-a t} cosh(c t)
    sh_c = 0.5 * (es - ef) / c  # e^{-a t} sinh(c t) / c
    # cosh - k sinh/c, written to avoid cancellation when k ~ c
    one_minus = (U * U / eps) / (c * (c + k))  # 1 - k/c
    k11 = 0.5 * (es * one_minus + ef * (2.0 - one_minus))
    K = np.empty((2, 2))
    K[0, 0] = ch + k * sh_c
    K[0, 1] = K[1, 0] = U / eps * sh_c
    K[1, 1] = k11 / eps
    return K


def resolvent_kernel_expm(eps: float, upsilon: float, lam: float, t: float) -> np.ndarray:
    """Matrix-exponential reference for :func:`resolvent_kernel`."""
    from scipy.linalg import expm

    if eps <= 0:
        raise DomainError("the matrix-exponential form needs eps > 0")
    U = upsilon
    A = np.array([[-U, U], [U, -U]], dtype=float)
    Pinv = np.diag([1.0, 1.0 / eps])
    return expm(t * Pinv @ (A - lam * np.eye(2))) @ Pinv
