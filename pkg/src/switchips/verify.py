"""Cross-oracle checks behind ``switchips verify``.

Each check returns a :class:`CheckResult`; the suite is deterministic except
for the seeded duality check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .macro import (
    MacroParams,
    macro_current,
    macro_profile,
    macro_profile_derivative,
    resolvent_kernel,
    resolvent_kernel_expm,
    uphill,
)
from .model import ModelParams, ReservoirDensities, make_stream
from .stationary import absorption_closed, absorption_linear, boundary_matrix, c_vectors, micro_profile

ABSORPTION_N = (2, 3, 5, 10, 50, 200)
ABSORPTION_GAMMA = (0.1, 1.0, 10.0)
ABSORPTION_EPS = (0.0, 1e-3, 0.5, 1.0)
RHO_TEST = (2.0, 4.0, 4.0, 2.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "pass": self.passed, "value": self.value,
            "tolerance": self.tolerance, **self.detail,
        }


def _params(n, eps, gamma, rho=RHO_TEST, sigma=0) -> ModelParams:
    return ModelParams(sigma=sigma, epsilon=eps, n_sites=n,
                       reservoir=ReservoirDensities.from_sequence(rho), gamma=gamma)


def check_absorption_oracle(tol: float = 1e-9) -> CheckResult:
    worst = 0.0
    for n, g, e in itertools.product(ABSORPTION_N, ABSORPTION_GAMMA, ABSORPTION_EPS):
        p = _params(n, e, g)
        a, b = absorption_closed(p), absorption_linear(p)
        worst = max(worst, float(np.abs(a.p - b.p).max()), float(np.abs(a.q - b.q).max()))
    return CheckResult("absorption closed vs linear", worst <= tol, worst, tol)


def check_row_stochastic(tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    hull_ok = True
    rho = np.array(RHO_TEST)
    for n, g, e in itertools.product(ABSORPTION_N, ABSORPTION_GAMMA, ABSORPTION_EPS):
        p = _params(n, e, g)
        for rows in (absorption_closed(p), absorption_linear(p)):
            worst = max(worst, float(np.abs(rows.p.sum(1) - 1).max()), float(np.abs(rows.q.sum(1) - 1).max()))
        prof = micro_profile(p)
        th = np.concatenate([prof.theta0, prof.theta1])
        hull_ok &= bool(th.min() >= rho.min() - 1e-12 and th.max() <= rho.max() + 1e-12)
    return CheckResult("row sums and maximum principle", worst <= tol and hull_ok, worst, tol,
                       {"hull": hull_ok})


def check_matrix_inverse(tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for n, e in itertools.product((1, 2, 5, 10, 20, 50), (0.01, 0.5, 1.0)):
        cv = c_vectors(_params(n, e, 1.0))
        M = boundary_matrix(n, e, 1.0)
        worst = max(worst, float(np.abs(M @ cv.matrix() - np.eye(4)).max()))
    big = micro_profile(_params(10**6, 0.5, 1e-6))
    finite = bool(np.all(np.isfinite(big.theta0)) and np.all(np.isfinite(big.theta1)) and math.isfinite(big.J))
    return CheckResult("boundary matrix times inverse", worst <= tol and finite, worst, tol,
                       {"large_n_finite": finite})


def check_macro_invariants(tol: float = 1e-5) -> CheckResult:
    """Stationary equations by central differences, constant total current,
    and Fick's law at equal diffusivities."""
    h = 1e-4
    y = np.linspace(0.01, 0.99, 99)
    worst = 0.0
    jworst = 0.0
    rho = ReservoirDensities.from_sequence((2, 6, 4, 2))
    for e in (1e-3, 0.5, 1.0):
        mp = MacroParams(e, 1.0, rho)
        r0m, r1m = macro_profile(mp, y - h)
        r0, r1 = macro_profile(mp, y)
        r0p, r1p = macro_profile(mp, y + h)
        d0 = (r0p - 2 * r0 + r0m) / h**2
        d1 = (r1p - 2 * r1 + r1m) / h**2
        res0 = d0 + mp.upsilon * (r1 - r0)
        res1 = e * d1 + mp.upsilon * (r0 - r1)
        worst = max(worst, float(np.abs(res0).max()), float(np.abs(res1).max()))
        J0, J1, J = macro_current(mp, y)
        jworst = max(jworst, float(np.abs(J0 + J1 - J).max()), float(np.ptp(J0 + J1)))
    mp1 = MacroParams(1.0, 1.0, rho)
    d0, d1 = macro_profile_derivative(mp1, y)
    fick = float(np.abs(macro_current(mp1, y)[2] + d0 + d1).max())
    ok = worst <= tol and jworst <= 1e-12 and fick <= 1e-6
    return CheckResult("macro stationary residual and currents", ok, worst, tol,
                       {"current_spread": jworst, "fick_eps1": fick})


def check_resolvent(tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for e, lam, t, U in itertools.product((1e-3, 0.1, 0.5, 1.0), (0.1, 1.0, 10.0, 100.0),
                                          (0.0, 0.01, 0.5, 2.0), (0.5, 1.0, 4.0)):
        K = resolvent_kernel(e, U, lam, t)
        R = resolvent_kernel_expm(e, U, lam, t)
        worst = max(worst, float(np.abs(K - R).max() / max(1.0, np.abs(R).max())))
    cont = max(
        float(np.abs(resolvent_kernel(1e-8, 1.0, lam, t) - resolvent_kernel(0.0, 1.0, lam, t)).max())
        for lam in (0.5, 1.0, 5.0) for t in (0.1, 1.0)
    )
    return CheckResult("resolvent closed form vs expm", worst <= tol and cont <= 1e-4, worst, tol,
                       {"eps0_continuity": cont})


def check_bessel_modes(tol: float = 1e-8) -> CheckResult:
    from .pde import modes_bessel, modes_exact

    rng = np.random.default_rng(0)
    k = np.arange(1, 9)
    worst = 0.0
    for e in (0.1, 0.5, 0.9):
        mp = MacroParams(e, 1.0, ReservoirDensities.from_sequence(RHO_TEST))
        b0, b1 = rng.normal(size=8) / k**2, rng.normal(size=8) / k**2
        for t in (0.01, 0.1, 0.5):
            a = np.array(modes_bessel(mp, b0, b1, t))
            b = np.array(modes_exact(mp, b0, b1, t))
            worst = max(worst, float(np.abs(a - b).max()))
    return CheckResult("Bessel kernel modes vs matrix exponential", worst <= tol, worst, tol)


def check_cn_fixed_point(tol: float = 1e-6) -> CheckResult:
    from .pde import CrankNicolson, stationary_grid

    mp = MacroParams(0.5, 1.0, ReservoirDensities.from_sequence((2, 6, 4, 2)))
    cn = CrankNicolson(mp, 1000, 1e-5)
    st = stationary_grid(mp, 1000)
    nxt = cn.step(cn.initial(st.rho0, st.rho1), 10)
    worst = float(max(np.abs(nxt.rho0 - st.rho0).max(), np.abs(nxt.rho1 - st.rho1).max()))
    return CheckResult("stationary profile is a Crank-Nicolson fixed point", worst <= tol, worst, tol)


def check_uphill_transition() -> CheckResult:
    rho = ReservoirDensities.from_sequence((2, 6, 4, 2))
    v_lo = uphill(MacroParams(0.25, 1.0, rho))
    v_hi = uphill(MacroParams(0.75, 1.0, rho))
    v_mid = uphill(MacroParams(0.5, 1.0, rho))
    ok = (v_lo.verdict == "uphill" and v_hi.verdict == "downhill"
          and v_mid.verdict == "boundary" and v_lo.critical_epsilon == 0.5)
    return CheckResult("uphill transition at critical epsilon", ok, float(v_lo.critical_epsilon or math.nan), 0.0)


def check_duality_quick(seed: int = 1, replicas: int = 20000) -> CheckResult:
    from .duality import DualityPairing, check_self_duality
    from .model import Configuration, DualConfiguration

    p = ModelParams(sigma=0, epsilon=0.5, n_sites=4,
                    reservoir=ReservoirDensities.from_sequence(RHO_TEST), gamma=1.0)
    eta = Configuration(np.array([[2, 1], [0, 3], [1, 1], [4, 0]]))
    xi = DualConfiguration.single(4, 2, 0, 1)
    rep = check_self_duality(DualityPairing(eta, xi, 1.0, replicas), p, make_stream(seed, 0))
    z = abs(rep.diff) / rep.se if rep.se > 0 else 0.0
    return CheckResult("duality identity (independent walkers)", rep.passed, z, 4.0, rep.to_dict())


SUITE = (
    check_absorption_oracle,
    check_row_stochastic,
    check_matrix_inverse,
    check_macro_invariants,
    check_resolvent,
    check_bessel_modes,
    check_cn_fixed_point,
    check_uphill_transition,
    check_duality_quick,
)


def run_suite() -> list[CheckResult]:
    return [f() for f in SUITE]
