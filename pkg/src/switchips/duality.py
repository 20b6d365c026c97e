"""Duality functions and a paired Monte Carlo check of the duality identity

    E_eta[ D(xi, eta_t) ] = E_xi[ D(xi_t, eta) ].

The left side runs the particle system from ``eta``, the right side runs the
dual (reservoirs replaced by absorbing end points) from ``xi``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .ctmc import dual_replicas, forward_replicas
from .errors import ValidationError
from .model import Configuration, DualConfiguration, ModelParams, single_site_dual

MOM_GROUPS = 20


def _falling(n: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``n (n-1) ... (n-k+1)`` elementwise, zero when ``k > n``."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k)
    out = np.ones(np.broadcast(n, k).shape)
    kmax = int(k.max(initial=0))
    for j in range(kmax):
        out = np.where(k > j, out * (n - j), out)
    return np.where(k > n, 0.0, out)


def duality_values(xi_bulk, xi_absorbed, eta, params: ModelParams) -> np.ndarray:
    """Vectorised duality function; leading axes broadcast (replica batches).

    ``xi_bulk`` and ``eta`` have trailing shape ``(N, 2)``; ``xi_absorbed`` has
    trailing shape ``(2, 2)`` indexed ``[side L/R, layer]``.
    """
    xi_bulk = np.asarray(xi_bulk)
    eta = np.asarray(eta)
    if xi_bulk.shape[-2:] != eta.shape[-2:]:
        raise ValidationError("dual and particle configurations have different sizes")
    vals = _falling(eta, xi_bulk)
    if params.sigma == 1:
        vals = vals / _factorial(xi_bulk)
    out = vals.prod(axis=(-2, -1))
    a = np.asarray(xi_absorbed, dtype=float)
    if np.any(a):
        rho = params.rho.reshape(2, 2)  # [side, layer]
        out = out * np.prod(rho ** a, axis=(-2, -1))
    return out


def _factorial(k: np.ndarray) -> np.ndarray:
    from scipy.special import factorial

    return factorial(k, exact=False)


def duality_function(xi: DualConfiguration, eta: Configuration, params: ModelParams) -> float:
    """``D(xi, eta)``: product of single-site factors and reservoir powers."""
    if xi.n_sites != eta.n_sites:
        raise ValidationError("dual and particle configurations have different sizes")
    val = 1.0
    for x in range(eta.n_sites):
        for i in range(2):
            k = int(xi.bulk[x, i])
            if k:
                val *= single_site_dual(k, int(eta.eta[x, i]), params.sigma)
                if val == 0.0:
                    return 0.0
    rho = params.rho.reshape(2, 2)
    for side in range(2):
        for i in range(2):
            k = int(xi.absorbed[side, i])
            if k:
                val *= float(rho[side, i]) ** k
    return val


@dataclass
class DualityPairing:
    eta: Configuration
    xi: DualConfiguration
    t: float
    replicas: int


@dataclass
class DualityReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    diff: float
    se: float
    passed: bool
    estimator: str
    lhs_mom: float
    rhs_mom: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=True)


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    n = v.size
    m = float(v.mean())
    if n < 2:
        return m, 0.0
    return m, float(v.std(ddof=1) / math.sqrt(n))


def median_of_means(v: np.ndarray, groups: int = MOM_GROUPS) -> tuple[float, float]:
    """Median of group means with the asymptotic normal-theory error
    ``sqrt(pi/2)`` times the standard error of one group mean over sqrt(groups)."""
    g = min(groups, v.size)
    means = np.array([c.mean() for c in np.array_split(v, g)])
    if g < 2:
        return float(means[0]), 0.0
    return float(np.median(means)), float(math.sqrt(math.pi / 2) * means.std(ddof=1) / math.sqrt(g))


def check_self_duality(
    pairing: DualityPairing, params: ModelParams, rng: np.random.Generator, k_se: float = 4.0
) -> DualityReport:
    """Run both sides of the identity and gate ``|lhs - rhs| <= k_se * SE``.

    SE pools both sides. The mean and the median-of-means are both computed
    and the gate uses whichever pooled SE is smaller.
    """
    if pairing.replicas < 1000:
        raise ValidationError("need at least 1000 replicas")
    eta, xi = pairing.eta, pairing.xi
    eta.check(params.sigma)
    if xi.n_sites != eta.n_sites or eta.n_sites != params.n_sites:
        raise ValidationError("configuration sizes do not match n_sites")
    if params.torus and np.any(xi.absorbed):
        raise ValidationError("the torus has no absorbing end points")
    R = int(pairing.replicas)
    finals = forward_replicas(params, eta, pairing.t, R, rng)
    lhs_v = duality_values(xi.bulk[None], xi.absorbed[None], finals, params)
    bulk, absd = dual_replicas(params, xi, pairing.t, R, rng)
    rhs_v = duality_values(bulk, absd, eta.eta[None], params)

    lm, ls = _mean_se(lhs_v)
    rm, rs = _mean_se(rhs_v)
    lmm, lms = median_of_means(lhs_v)
    rmm, rms = median_of_means(rhs_v)
    se_mean = math.hypot(ls, rs)
    se_mom = math.hypot(lms, rms)
    if se_mom < se_mean:
        diff, se, name = lmm - rmm, se_mom, "median-of-means"
        lhs, lhs_se, rhs, rhs_se = lmm, lms, rmm, rms
    else:
        diff, se, name = lm - rm, se_mean, "mean"
        lhs, lhs_se, rhs, rhs_se = lm, ls, rm, rs
    passed = bool(abs(diff) <= k_se * se)
    return DualityReport(lhs, lhs_se, rhs, rhs_se, diff, se, passed, name, lmm, rmm)
