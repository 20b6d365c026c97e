"""Exact non-equilibrium steady state of the boundary-driven chain.

Absorption probabilities of one dual walker are computed three ways: a
block-tridiagonal linear solve (the reference), a closed form for a frozen
slow layer, and the two-root closed form for a mobile slow layer. Densities
follow as ``theta_0(x) = p_x . rho`` and ``theta_1(x) = q_x . rho``.

Rows are 4-vectors ordered (L0, L1, R0, R1); sites are 1-based in the
mathematical description and 0-based in the returned arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, SingularError
from .model import ModelParams, validate


@dataclass(frozen=True)
class AbsorptionRows:
    """``p[x]`` (start on layer 0) and ``q[x]`` (start on layer 1), shape (N, 4)."""

    p: np.ndarray
    q: np.ndarray


_U_LARGE = 1e150
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class RootPair:
    """Roots of ``eps a^2 - (gamma(1+eps) + 2 eps) a + eps = 0``.

    ``alpha1_minus_1`` keeps the small root's offset from 1 at full relative
    precision, which the power evaluations rely on.
    """

    alpha1: float
    alpha2: float
    alpha1_minus_1: float
    log_alpha1: float

    def residual(self, eps: float, gamma: float) -> tuple[float, float]:
        f = lambda a: eps * a * a - (gamma * (1 + eps) + 2 * eps) * a + eps  # noqa: E731
        return f(self.alpha1), f(self.alpha2)


@dataclass(frozen=True)
class CVectors:
    """Rows of the inverse of the 4x4 boundary matrix.

    ``c4_scaled = c4 * alpha2**(N+1)`` is what the profile needs; ``c4`` itself
    underflows for long chains and is only meaningful for moderate N.
    """

    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    c4: np.ndarray
    c4_scaled: np.ndarray
    roots: RootPair
    n_sites: int
    epsilon: float

    def matrix(self) -> np.ndarray:
        return np.vstack([self.c1, self.c2, self.c3, self.c4])


@dataclass(frozen=True)
class MicroProfile:
    """Stationary densities and currents; bond currents have length N-1."""

    theta0: np.ndarray
    theta1: np.ndarray
    J0: np.ndarray
    J1: np.ndarray
    J: float

    @property
    def total_current_per_bond(self) -> np.ndarray:
        return self.J0 + self.J1


# --------------------------------------------------------------------------
# linear solve


@njit(cache=True)
def _rhs(n):
    # absorbing neighbours of the end sites, one column per target (L0, L1, R0, R1)
    b = np.zeros((n, 2, 4))
    b[0, 0, 0] += 1.0
    b[0, 1, 1] += 1.0
    b[n - 1, 0, 2] += 1.0
    b[n - 1, 1, 3] += 1.0
    return b


def _residual(n, eps, gamma, b, u):
    """``b - A u`` with ``A`` assembled and applied in extended precision.

    Rounding ``dq + gamma`` to double already perturbs the row sums at the
    1e-12 level for long chains; long double residuals remove that.
    """
    ld = np.longdouble
    e, g = ld(eps), ld(gamma)
    uu = u.astype(ld)
    p, q = uu[:, 0], uu[:, 1]
    dq = np.full(n, 2 * e, dtype=ld)
    dq[0] += 1 - e
    dq[-1] += 1 - e
    out = np.empty_like(uu)
    out[:, 0] = (2 + g) * p - g * q
    out[:, 1] = (dq[:, None] + g) * q - g * p
    out[1:, 0] -= p[:-1]
    out[:-1, 0] -= p[1:]
    out[1:, 1] -= e * q[:-1]
    out[:-1, 1] -= e * q[1:]
    return (b.astype(ld) - out).astype(float)


@njit(cache=True)
def _block_thomas(n, eps, gamma, rhs):
    """Block elimination for the absorption operator with right side ``rhs``
    of shape (n, 2, m); returns the solution in the same shape."""
    m = rhs.shape[2]
    cp = np.zeros((n, 2, 2))
    dp = np.zeros((n, 2, m))
    r = np.zeros((2, m))
    for x in range(n):
        left_in = x > 0
        right_in = x < n - 1
        dq = (eps if left_in else 1.0) + (eps if right_in else 1.0)
        b00 = 2.0 + gamma
        b01 = -gamma
        b10 = -gamma
        b11 = dq + gamma
        for k in range(m):
            r[0, k] = rhs[x, 0, k]
            r[1, k] = rhs[x, 1, k]
        if left_in:
            # subtract A_x * (previous elimination), A_x = diag(-1, -eps)
            a0 = -1.0
            a1 = -eps
            b00 -= a0 * cp[x - 1, 0, 0]
            b01 -= a0 * cp[x - 1, 0, 1]
            b10 -= a1 * cp[x - 1, 1, 0]
            b11 -= a1 * cp[x - 1, 1, 1]
            for k in range(m):
                r[0, k] -= a0 * dp[x - 1, 0, k]
                r[1, k] -= a1 * dp[x - 1, 1, k]
        det = b00 * b11 - b01 * b10
        if det == 0.0:
            return dp * np.nan
        i00 = b11 / det
        i01 = -b01 / det
        i10 = -b10 / det
        i11 = b00 / det
        if right_in:
            c0 = -1.0
            c1 = -eps
            cp[x, 0, 0] = i00 * c0
            cp[x, 0, 1] = i01 * c1
            cp[x, 1, 0] = i10 * c0
            cp[x, 1, 1] = i11 * c1
        for k in range(m):
            dp[x, 0, k] = i00 * r[0, k] + i01 * r[1, k]
            dp[x, 1, k] = i10 * r[0, k] + i11 * r[1, k]
    u = np.zeros((n, 2, m))
    u[n - 1] = dp[n - 1]
    for x in range(n - 2, -1, -1):
        for k in range(m):
            u[x, 0, k] = dp[x, 0, k] - cp[x, 0, 0] * u[x + 1, 0, k] - cp[x, 0, 1] * u[x + 1, 1, k]
            u[x, 1, k] = dp[x, 1, k] - cp[x, 1, 0] * u[x + 1, 0, k] - cp[x, 1, 1] * u[x + 1, 1, k]
    return u


def absorption_linear(params: ModelParams, refine: int = 2) -> AbsorptionRows:
    """Absorption probabilities by block-tridiagonal elimination, O(N),
    followed by ``refine`` steps of iterative refinement."""
    validate(params)
    gamma = params.switch_rate
    if gamma <= 0:
        raise SingularError("switch rate must be positive")
    n, eps = int(params.n_sites), float(params.epsilon)
    b = _rhs(n)
    u = _block_thomas(n, eps, float(gamma), b)
    for _ in range(refine):
        u = u + _block_thomas(n, eps, float(gamma), _residual(n, eps, gamma, b, u))
    if not np.all(np.isfinite(u)):
        raise SingularError("block elimination hit a singular pivot")
    return AbsorptionRows(u[:, 0, :].copy(), u[:, 1, :].copy())


def absorption_dense(params: ModelParams) -> AbsorptionRows:
    """Same system assembled densely and solved with LAPACK (test oracle)."""
    validate(params)
    n = params.n_sites
    eps = params.epsilon
    g = params.switch_rate
    A = np.zeros((2 * n, 2 * n))
    b = np.zeros((2 * n, 4))
    for x in range(n):
        P, Q = x, n + x
        A[P, P] = 2 + g
        A[P, Q] = -g
        A[Q, Q] = g
        A[Q, P] = -g
        for y, side in ((x - 1, 0), (x + 1, 1)):
            if 0 <= y < n:
                A[P, y] -= 1
                A[Q, Q] += eps
                A[Q, n + y] -= eps
            else:
                b[P, 2 * side] += 1
                A[Q, Q] += 1
                b[Q, 2 * side + 1] += 1
    sol = np.linalg.solve(A, b)
    return AbsorptionRows(sol[:n], sol[n:])


# --------------------------------------------------------------------------
# frozen slow layer


def absorption_closed_eps0(params: ModelParams) -> AbsorptionRows:
    """Closed-form absorption probabilities when the slow layer is frozen."""
    validate(params)
    if params.epsilon != 0:
        raise DomainError("this closed form needs epsilon = 0")
    n = params.n_sites
    g = params.switch_rate
    x = np.arange(1, n + 1, dtype=float)
    den = 1 + n + 2 * n * g
    f0 = (1 + g) / (1 + 2 * g)
    f1 = g / (1 + 2 * g)
    left = ((1 + n) + (1 + 2 * n) * g - (1 + 2 * g) * x) / den
    right = (-g + (1 + 2 * g) * x) / den
    p = np.column_stack([f0 * left, f1 * left, f0 * right, f1 * right])
    q = p.copy()
    D = (1 + 2 * g) * den
    q1 = np.array([
        g * (n - g + 2 * n * g),
        1 + n + (1 + 3 * n) * g - (1 - 2 * n) * g * g,
        g * (1 + g),
        g * g,
    ]) / D
    if n == 1:
        # both ends touch the only site; solve the 2x2 system directly
        return absorption_linear(params)
    q[0] = q1
    q[-1] = q1[[2, 3, 0, 1]]
    return AbsorptionRows(p, q)


# --------------------------------------------------------------------------
# mobile slow layer


def roots(eps: float, gamma: float) -> RootPair:
    """Stable evaluation of the two reciprocal roots."""
    if eps <= 0:
        raise DomainError("roots need epsilon > 0")
    if gamma <= 0:
        raise DomainError("roots need gamma > 0")
    u = 0.5 * gamma * (1.0 + 1.0 / eps)
    if u < _U_LARGE:
        # alpha2 = 1 + u + sqrt(u^2 + 2u), no cancellation for small u either
        log_a2 = math.log1p(u + math.sqrt(u * u + 2.0 * u))
    else:
        log_u = math.log(0.5 * gamma) + math.log1p(eps) - math.log(eps)
        log_a2 = log_u + _LOG2
    return RootPair(math.exp(-log_a2), math.exp(log_a2) if log_a2 < 709 else math.inf,
                    math.expm1(-log_a2), -log_a2)


def closed_form_representable(eps: float, gamma: float) -> bool:
    """Whether the closed-form coefficients stay in normal floating range."""
    return eps > 0 and 0.5 * gamma * (1.0 + 1.0 / eps) < _U_LARGE


def boundary_matrix(n: int, eps: float, gamma: float) -> np.ndarray:
    """The 4x4 matrix whose inverse rows give the profile coefficients.

    Only sensible when ``alpha2**(N+1)`` is representable.
    """
    r = roots(eps, gamma)
    a1, a2 = r.alpha1, r.alpha2
    e = eps
    return np.array([
        [0.0, 1.0, e, e],
        [1 - e, 1.0, (e - 1) * a1 - e, (e - 1) * a2 - e],
        [n + 1, 1.0, e * a1 ** (n + 1), e * a2 ** (n + 1)],
        [n + e, 1.0, -a1**n * (e * a1 + 1 - e), -a2**n * (e * a2 + 1 - e)],
    ])


def c_vectors(params: ModelParams) -> CVectors:
    """Coefficient rows from the closed-form inverse, evaluated through powers
    of the small root only so that long chains do not overflow."""
    validate(params)
    eps = float(params.epsilon)
    if eps == 0:
        raise DomainError("c-vectors need epsilon > 0")
    n = int(params.n_sites)
    rp = roots(eps, params.switch_rate)
    L = rp.log_alpha1  # < 0
    e = eps
    pw = lambda k: math.exp(k * L)  # noqa: E731  alpha1**k
    om = lambda k: -math.expm1(k * L)  # noqa: E731  1 - alpha1**k
    a1 = rp.alpha1

    k_t = om(n + 1)
    # alpha1 - alpha1**N = alpha1 (1 - alpha1**(N-1))
    a_minus_aN = a1 * om(n - 1)
    h_t = (1 - e) * a_minus_aN + e * k_t
    F_t = (1 - e) * (a1 + pw(n)) + 2 * e * (1 + pw(n + 1))
    G_t = (1 + n) * (1 - e) * a_minus_aN + 2 * e * (n + e) * k_t
    FG = F_t * G_t

    c1 = np.array([-h_t, -e * k_t, h_t, e * k_t]) / G_t

    # alpha1**(N+1) (alpha2**k - alpha1**k) = alpha1**(N+1-k) (1 - alpha1**(2k))
    def Dt(k: int) -> float:
        return pw(n + 1 - k) * om(2 * k)

    dN1, d1, dNp1, dN = Dt(n - 1), Dt(1), Dt(n + 1), Dt(n)
    m2 = np.array([
        (1 + n) * (1 - e) ** 2 * dN1 - e * (1 - e) ** 2 * d1
        + e * e * (1 + 2 * n + e) * dNp1 + e * (1 - e) * (2 + 3 * n + e) * dN,
        e * ((1 - e) * (1 + n) * dN + e * (1 + 2 * n + e) * dNp1),
        e * (1 - e) * ((n + e) * d1 - (1 - e) * dN - e * dNp1),
        -e * (1 - e) * ((1 + n) * d1 + e * dNp1),
    ])
    c2 = m2 / FG

    # polynomial rows in z with basis (1, z, z**N, z**(N+1))
    coef = np.array([
        [-e * (1 - e), -(1 - e) ** 2, (1 - e) * (n + e), -e * (1 - 2 * n - 3 * e)],
        [-e * (1 - e), 0.0, -(1 - e) * (1 + n), -e * (1 + 2 * n + e)],
        [e * (1 - 2 * n - 3 * e), -(1 - e) * (n + e), (1 - e) ** 2, e * (1 - e)],
        [e * (1 + 2 * n + e), (1 + n) * (1 - e), 0.0, e * (1 - e)],
    ])
    # z = alpha2, scaled by alpha1**(N+1): basis -> (a^(N+1), a^N, a, 1)
    basis_big = np.array([pw(n + 1), pw(n), a1, 1.0])
    # z = alpha1: basis -> (1, a, a^N, a^(N+1))
    basis_small = np.array([1.0, a1, pw(n), pw(n + 1)])
    c3 = coef @ basis_big / FG
    c4_scaled = -(coef @ basis_small) / FG
    c4 = c4_scaled * pw(n + 1)
    return CVectors(c1, c2, c3, c4, c4_scaled, rp, n, eps)


def _profile_rows(cv: CVectors, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """p_x, q_x rows (len(x), 4) from the coefficient rows."""
    L = cv.roots.log_alpha1
    n = cv.n_sites
    x = np.asarray(x, dtype=float)[:, None]
    lin = cv.c1[None] * x + cv.c2[None]
    expo = cv.c3[None] * np.exp(x * L) + cv.c4_scaled[None] * np.exp((n + 1 - x) * L)
    return lin + cv.epsilon * expo, lin - expo


def absorption_closed_eps_pos(params: ModelParams) -> AbsorptionRows:
    """Closed-form absorption probabilities for a mobile slow layer."""
    if not closed_form_representable(params.epsilon, params.switch_rate):
        return absorption_linear(params)
    cv = c_vectors(params)
    x = np.arange(1, params.n_sites + 1)
    p, q = _profile_rows(cv, x)
    return AbsorptionRows(p, q)


def absorption_closed(params: ModelParams) -> AbsorptionRows:
    if params.epsilon == 0:
        return absorption_closed_eps0(params)
    return absorption_closed_eps_pos(params)


# --------------------------------------------------------------------------
# profiles and currents


def micro_profile(params: ModelParams, method: str = "closed") -> MicroProfile:
    """Stationary densities ``theta_i(x)`` and currents.

    ``method`` is ``"closed"`` (closed forms) or ``"linear"`` (block solve).
    The bond currents are ``theta0(x) - theta0(x+1)`` and
    ``eps (theta1(x) - theta1(x+1))``; the total current comes from the closed
    expression, which does not depend on the bond.
    """
    validate(params)
    rho = params.rho
    eps = float(params.epsilon)
    n = params.n_sites
    g = params.switch_rate
    if method == "linear":
        rows = absorption_linear(params)
    elif method == "closed":
        rows = absorption_closed(params)
    else:
        raise ValueError(f"unknown method {method!r}")
    th0 = rows.p @ rho
    th1 = rows.q @ rho
    if eps == 0 and method == "closed" and n > 1:
        # top layer next to the ends, written directly in the densities
        th1 = th0.copy()
        th1[0] = g / (1 + g) * th0[0] + rho[1] / (1 + g)
        th1[-1] = g / (1 + g) * th0[-1] + rho[3] / (1 + g)
    J0 = th0[:-1] - th0[1:]
    J1 = eps * (th1[:-1] - th1[1:])
    a0 = rho[2] - rho[0]
    a1 = rho[3] - rho[1]
    if eps == 0:
        den = 1 + n + 2 * n * g
        J = -(1 + g) / den * a0 - g / den * a1
    elif method == "closed" and closed_form_representable(eps, g):
        J = float(-(1 + eps) * c_vectors(params).c1 @ rho)
    else:
        J = float((J0 + J1)[0]) if n > 1 else float("nan")
    return MicroProfile(th0, th1, J0, J1, float(J))
