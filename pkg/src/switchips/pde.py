"""Time-dependent double-diffusivity system on [0, 1].

Two independent solvers are provided: Crank-Nicolson finite differences (any
boundary data, also periodic) and a sine-series solver that writes every
mode as a Bessel-kernel integral over its own heat flow. They serve as
oracles for one another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sps
from scipy.integrate import quad_vec
from scipy.sparse.linalg import splu

from .bessel import i0e, i1e
from .errors import DomainError, QuadratureError, ValidationError
from .macro import MacroParams, macro_profile


@dataclass
class GridFunctionPair:
    """Layer densities on a uniform grid; ``y`` holds the node positions."""

    y: np.ndarray
    rho0: np.ndarray
    rho1: np.ndarray
    t: float = 0.0

    @property
    def total(self) -> np.ndarray:
        return self.rho0 + self.rho1

    def copy(self) -> "GridFunctionPair":
        return GridFunctionPair(self.y.copy(), self.rho0.copy(), self.rho1.copy(), self.t)


def uniform_grid(M: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, M + 1)


def stationary_grid(mp: MacroParams, M: int) -> GridFunctionPair:
    y = uniform_grid(M)
    r0, r1 = macro_profile(mp, y)
    return GridFunctionPair(y, np.asarray(r0, float), np.asarray(r1, float), 0.0)


# --------------------------------------------------------------------------
# Crank-Nicolson


class CrankNicolson:
    """Crank-Nicolson stepper with diffusion and switching both implicit.

    ``periodic=False``: ``M + 1`` nodes on [0, 1], end nodes pinned to
    ``bc = (rho_L0, rho_L1, rho_R0, rho_R1)``. ``periodic=True``: ``M`` nodes
    ``j / M`` on the circle. The system matrix is factored once.
    """

    def __init__(self, mp: MacroParams, M: int, dt: float, *, periodic: bool = False, bc=None):
        if M < 2:
            raise ValidationError("need at least 2 grid intervals")
        if not dt > 0:
            raise ValidationError("dt must be positive")
        self.mp = mp
        self.M = int(M)
        self.dt = float(dt)
        self.periodic = periodic
        self.h = 1.0 / M
        self.bc = np.asarray(mp.rho if bc is None else bc, dtype=float)
        e, U = mp.epsilon, mp.upsilon
        n = M if periodic else M - 1
        self.n = n
        ones = np.ones(n)
        lap = sps.diags([ones[:-1], -2 * ones, ones[:-1]], [-1, 0, 1], format="lil")
        if periodic:
            lap[0, n - 1] = 1.0
            lap[n - 1, 0] = 1.0
        lap = sps.csr_matrix(lap) / self.h**2
        I = sps.identity(n, format="csr")
        A = sps.bmat([[lap - U * I, U * I], [U * I, e * lap - U * I]], format="csr")
        # interleave layers so the factor stays narrow
        perm = np.empty(2 * n, dtype=int)
        perm[0::2] = np.arange(n)
        perm[1::2] = n + np.arange(n)
        self._perm = perm
        P = sps.identity(2 * n, format="csr")[perm]
        A = P @ A @ P.T
        self.A = A.tocsr()
        I2 = sps.identity(2 * n, format="csc")
        self._lhs = splu((I2 - 0.5 * dt * self.A).tocsc())
        self._rhs = (I2 + 0.5 * dt * self.A).tocsr()
        g = np.zeros((2, n))
        if not periodic:
            g[0, 0] += self.bc[0] / self.h**2
            g[1, 0] += e * self.bc[1] / self.h**2
            g[0, -1] += self.bc[2] / self.h**2
            g[1, -1] += e * self.bc[3] / self.h**2
        self._g = g.T.reshape(-1)  # interleaved

    @property
    def y(self) -> np.ndarray:
        if self.periodic:
            return np.arange(self.M) / self.M
        return uniform_grid(self.M)

    def _pack(self, st: GridFunctionPair) -> np.ndarray:
        if self.periodic:
            r0, r1 = st.rho0, st.rho1
        else:
            r0, r1 = st.rho0[1:-1], st.rho1[1:-1]
        return np.column_stack([r0, r1]).reshape(-1)

    def _unpack(self, u: np.ndarray, t: float) -> GridFunctionPair:
        v = u.reshape(-1, 2)
        if self.periodic:
            return GridFunctionPair(self.y, v[:, 0].copy(), v[:, 1].copy(), t)
        r0 = np.concatenate([[self.bc[0]], v[:, 0], [self.bc[2]]])
        r1 = np.concatenate([[self.bc[1]], v[:, 1], [self.bc[3]]])
        return GridFunctionPair(self.y, r0, r1, t)

    def stationary(self) -> GridFunctionPair:
        """Fixed point of the discrete scheme (solves ``A u + g = 0``)."""
        from scipy.sparse.linalg import spsolve

        if self.periodic:
            raise ValidationError("the periodic problem has no unique fixed point")
        u = spsolve(self.A.tocsc(), -self._g)
        return self._unpack(u, 0.0)

    def initial(self, rho0, rho1) -> GridFunctionPair:
        """Wrap grid values, forcing the end nodes to the boundary data."""
        st = GridFunctionPair(self.y, np.array(rho0, float), np.array(rho1, float), 0.0)
        if st.rho0.shape != self.y.shape or st.rho1.shape != self.y.shape:
            raise ValidationError("initial data must match the grid")
        if not self.periodic:
            st.rho0[0], st.rho1[0], st.rho0[-1], st.rho1[-1] = self.bc
        return st

    def step(self, st: GridFunctionPair, n_steps: int = 1) -> GridFunctionPair:
        u = self._pack(st)
        gdt = self.dt * self._g
        for _ in range(int(n_steps)):
            u = self._lhs.solve(self._rhs @ u + gdt)
        return self._unpack(u, st.t + n_steps * self.dt)

    def advance(self, st: GridFunctionPair, t_final: float) -> GridFunctionPair:
        n = int(round((t_final - st.t) / self.dt))
        if n < 0 or abs(st.t + n * self.dt - t_final) > 1e-9 * max(1.0, t_final):
            raise ValidationError("t_final must be reachable in whole steps")
        return self.step(st, n)

    def trajectory(self, st: GridFunctionPair, n_steps: int, every: int = 1) -> list[GridFunctionPair]:
        out = [st]
        cur = st
        for _ in range(n_steps // every):
            cur = self.step(cur, every)
            out.append(cur)
        return out


def pde_step_cn(state: GridFunctionPair, dt: float, mp: MacroParams, bc=None) -> GridFunctionPair:
    """One Crank-Nicolson step with Dirichlet data ``bc`` (default: reservoirs)."""
    M = state.y.size - 1
    return CrankNicolson(mp, M, dt, bc=bc).step(state)


# --------------------------------------------------------------------------
# energy


def energy(st: GridFunctionPair) -> float:
    """``int (rho0^2 + rho1^2) dy`` by the trapezoid rule."""
    f = st.rho0**2 + st.rho1**2
    h = st.y[1] - st.y[0]
    return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))


def mode_matrix(mp: MacroParams, lam: float) -> np.ndarray:
    """Generator of one sine mode with Laplacian eigenvalue ``-lam``."""
    e, U = mp.epsilon, mp.upsilon
    return np.array([[-lam - U, U], [U, -e * lam - U]])


def spectral_gap(mp: MacroParams, lam1: float = math.pi**2) -> float:
    """Slowest decay rate of the homogeneous Dirichlet problem (first mode)."""
    return float(-np.linalg.eigvalsh(mode_matrix(mp, lam1)).max())


# --------------------------------------------------------------------------
# sine series and the Bessel-kernel solution


def sine_coefficients(values: np.ndarray) -> np.ndarray:
    """Coefficients ``b_k``, k = 1..M-1, of the sine interpolant of grid data
    on ``M + 1`` nodes vanishing at both ends."""
    v = np.asarray(values, dtype=float)
    M = v.size - 1
    return scipy.fft.dst(v[1:-1], type=1) / M


def sine_synthesis(coeffs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_k b_k sin(k pi y)`` at arbitrary points."""
    k = np.arange(1, len(coeffs) + 1)
    return np.sin(np.pi * np.outer(np.asarray(y, float), k)) @ coeffs


def _synth_on_grid(coeffs: np.ndarray, M: int) -> np.ndarray:
    full = np.zeros(M - 1)
    m = min(len(coeffs), M - 1)
    full[:m] = coeffs[:m]
    out = np.zeros(M + 1)
    out[1:-1] = scipy.fft.dst(full, type=1) / 2.0
    return out


def modes_exact(mp: MacroParams, b0: np.ndarray, b1: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode matrix exponentials: reference values for the series solver."""
    from scipy.linalg import expm

    c0 = np.empty(len(b0))
    c1 = np.empty(len(b0))
    for j in range(len(b0)):
        lam = ((j + 1) * math.pi) ** 2
        v = expm(t * mode_matrix(mp, lam)) @ np.array([b0[j], b1[j]])
        c0[j], c1[j] = v
    return c0, c1


def modes_bessel(
    mp: MacroParams, b0: np.ndarray, b1: np.ndarray, t: float,
    tol: float = 1e-8, max_eval: int = 10**6,
) -> tuple[np.ndarray, np.ndarray]:
    """Evolve sine coefficients of the homogeneous problem to time ``t``.

    Each layer is its own heat flow (diffusivity 1 and eps) started from
    either layer, weighted by a modified-Bessel kernel in the time the
    particle spent on the fast layer. The kernel integral over ``s`` in
    ``[eps t, t]`` is mapped to ``phi`` in ``[0, pi]`` by
    ``s = eps t + (1 - eps) t (1 - cos phi) / 2``, which removes the inverse
    square-root singularities at both ends.
    """
    b0 = np.asarray(b0, float)
    b1 = np.asarray(b1, float)
    e, U = mp.epsilon, mp.upsilon
    if not (0.0 < e <= 1.0):
        raise DomainError("the series solver needs 0 < eps <= 1")
    lam = (np.arange(1, len(b0) + 1) * math.pi) ** 2
    if t == 0:
        return b0.copy(), b1.copy()
    if e == 1.0:
        # equal diffusivities: the sum diffuses, the difference also relaxes at rate 2U
        s = 0.5 * (b0 + b1) * np.exp(-lam * t)
        d = 0.5 * (b0 - b1) * np.exp(-(lam + 2 * U) * t)
        return s + d, s - d
    # drop modes already extinct at the earliest kernel time eps t
    scale = max(np.abs(b0).max(initial=0), np.abs(b1).max(initial=0))
    if scale == 0:
        return np.zeros_like(b0), np.zeros_like(b1)
    alive = (np.maximum(np.abs(b0), np.abs(b1)) * np.exp(-lam * e * t)) > 1e-18 * scale
    idx = np.nonzero(alive)[0]
    lk = lam[idx]
    w = (1.0 - e) * t  # length of the s-interval
    Ut = U * t

    def integrand(phi: float) -> np.ndarray:
        sh = math.sin(0.5 * phi)
        chh = math.cos(0.5 * phi)
        s = e * t + w * sh * sh
        ups = Ut * math.sin(phi)
        # e^{-U t} I(ups) = ie(ups) e^{ups - U t}
        damp = math.exp(ups - Ut)
        j1 = i1e(ups) * damp
        j0 = i0e(ups) * damp
        heat = np.exp(-lk * s)
        jac = w  # ds = w sin(phi/2) cos(phi/2) dphi, singular weights absorbed below
        a = jac * sh * sh * j1 * heat  # sqrt((s-et)/(t-s)) I1 ds
        b = jac * sh * chh * j0 * heat  # I0 ds
        c = jac * chh * chh * j1 * heat  # sqrt((t-s)/(s-et)) I1 ds
        return np.concatenate([a, b, c])

    res, err, info = quad_vec(
        integrand, 0.0, math.pi, epsabs=tol * 1e-2, epsrel=1e-12, norm="max",
        limit=max_eval // 21, full_output=True,
    )
    if err > tol or info.neval > max_eval or not info.success:
        raise QuadratureError(f"kernel integral error {err:.2e} after {info.neval} evaluations")
    m = len(idx)
    A, Bi, C = res[:m], res[m : 2 * m], res[2 * m :]
    pref = U / (1.0 - e)
    eU = math.exp(-Ut)
    c0 = np.zeros_like(b0)
    c1 = np.zeros_like(b1)
    c0[idx] = eU * b0[idx] * np.exp(-lk * t) + pref * (A * b0[idx] + Bi * b1[idx])
    c1[idx] = eU * b1[idx] * np.exp(-lk * e * t) + pref * (C * b1[idx] + Bi * b0[idx])
    return c0, c1


def pde_solve_bessel(
    mp: MacroParams, rho0_init, rho1_init, t: float, tol: float = 1e-8
) -> GridFunctionPair:
    """Solve the boundary-driven problem from grid data at time ``t``.

    ``rho*_init`` are values on a uniform grid of ``M + 1`` nodes that agree
    with the reservoir densities at the ends; their deviation from the
    stationary profile is expanded in sines and evolved exactly.
    """
    if mp.epsilon == 0:
        raise DomainError("the series solver needs eps > 0")
    r0 = np.asarray(rho0_init, float)
    r1 = np.asarray(rho1_init, float)
    M = r0.size - 1
    stat = stationary_grid(mp, M)
    b0 = sine_coefficients(r0 - stat.rho0)
    b1 = sine_coefficients(r1 - stat.rho1)
    c0, c1 = modes_bessel(mp, b0, b1, t, tol=tol)
    if t == 0:
        return GridFunctionPair(stat.y, r0.copy(), r1.copy(), 0.0)
    return GridFunctionPair(
        stat.y, stat.rho0 + _synth_on_grid(c0, M), stat.rho1 + _synth_on_grid(c1, M), t
    )


# --------------------------------------------------------------------------
# telegrapher residual


def telegrapher_residual(
    mp: MacroParams, snapshots: list[GridFunctionPair], tau: float, n_modes: int = 64
) -> np.ndarray:
    """Finite-difference residual of the second-order-in-time equation for
    the total density ``rho0 + rho1``.

    ``snapshots`` are five grid states equally spaced by ``tau``; the residual
    is returned at the middle time. Time derivatives are 5-point central
    differences and the Laplacian is the 3-point one, applied through its
    exact eigenvalues on the sine coefficients of the deviation from the
    discrete fixed point (both satisfy the equation, so only the deviation
    carries a residual).
    """
    if len(snapshots) != 5:
        raise ValueError("need exactly five snapshots")
    e, U = mp.epsilon, mp.upsilon
    M = snapshots[0].y.size - 1
    fixed = CrankNicolson(mp, M, 1.0).stationary()
    cs = np.array([sine_coefficients(s.total - fixed.total)[:n_modes] for s in snapshots])
    c = cs[2]
    dc = (cs[0] - 8 * cs[1] + 8 * cs[3] - cs[4]) / (12 * tau)
    ddc = (-cs[0] + 16 * cs[1] - 30 * cs[2] + 16 * cs[3] - cs[4]) / (12 * tau**2)
    k = np.arange(1, len(c) + 1)
    lam = 4.0 * M * M * np.sin(0.5 * math.pi * k / M) ** 2
    # rho_tt + 2U rho_t + eps lap^2 rho - (1+eps) lap (rho_t + U rho) = 0
    r = ddc + 2 * U * dc + e * lam**2 * c + (1 + e) * lam * (dc + U * c)
    return _synth_on_grid(r, M)
