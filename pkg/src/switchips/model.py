"""Domain types, parameter validation, single-site duality polynomials and
equilibrium marginal samplers.

Reservoir densities are always ordered ``(L0, L1, R0, R1)``: left/right end,
then layer 0 (fast) / layer 1 (slow).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, ValidationError

BULK_TORUS = "bulk-torus"
BOUNDARY_DRIVEN = "boundary-driven"
MODES = (BULK_TORUS, BOUNDARY_DRIVEN)

RESERVOIR_KEYS = ("rho_L0", "rho_L1", "rho_R0", "rho_R1")


# --------------------------------------------------------------------------
# random streams


def make_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator reproducible from ``(seed, stream_id)``.

    Distinct stream ids give statistically independent Philox streams, so
    replicas can be farmed out in any order without changing results.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ReservoirDensities:
    rho_L0: float = 0.0
    rho_L1: float = 0.0
    rho_R0: float = 0.0
    rho_R1: float = 0.0

    @classmethod
    def from_sequence(cls, values: Iterable[float]) -> "ReservoirDensities":
        vals = [float(v) for v in values]
        if len(vals) != 4:
            raise ValidationError(
                f"reservoir needs 4 densities (L0,L1,R0,R1), got {len(vals)}"
            )
        return cls(*vals)

    @classmethod
    def uniform(cls, theta: float) -> "ReservoirDensities":
        return cls(theta, theta, theta, theta)

    def as_array(self) -> np.ndarray:
        return np.array([self.rho_L0, self.rho_L1, self.rho_R0, self.rho_R1], dtype=float)

    def swapped_sides(self) -> "ReservoirDensities":
        return ReservoirDensities(self.rho_R0, self.rho_R1, self.rho_L0, self.rho_L1)

    def swapped_layers(self) -> "ReservoirDensities":
        return ReservoirDensities(self.rho_L1, self.rho_L0, self.rho_R1, self.rho_R0)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of one run.

    Exactly one of ``gamma`` (microscopic switch rate) and ``upsilon``
    (macroscopic rate, with ``gamma = upsilon / N**2``) is authoritative;
    the other may be left as ``None`` and is derived on demand.
    """

    sigma: int
    epsilon: float
    n_sites: int
    reservoir: ReservoirDensities = field(default_factory=ReservoirDensities)
    gamma: float | None = None
    upsilon: float | None = None
    mode: str = BOUNDARY_DRIVEN

    @property
    def switch_rate(self) -> float:
        """Microscopic switch rate, derived from ``upsilon`` when needed."""
        if self.gamma is not None:
            return float(self.gamma)
        if self.upsilon is None:
            raise ValidationError("neither gamma nor upsilon given")
        return float(self.upsilon) / float(self.n_sites) ** 2

    @property
    def macro_rate(self) -> float:
        if self.upsilon is not None:
            return float(self.upsilon)
        return self.switch_rate * float(self.n_sites) ** 2

    @property
    def rho(self) -> np.ndarray:
        return self.reservoir.as_array()

    @property
    def torus(self) -> bool:
        return self.mode == BULK_TORUS

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    # -- key=value serialization ------------------------------------------

    def to_config(self, seed: int | None = None) -> str:
        lines = [
            f"sigma={self.sigma}",
            f"epsilon={self.epsilon!r}",
        ]
        if self.gamma is not None:
            lines.append(f"gamma={float(self.gamma)!r}")
        else:
            lines.append(f"upsilon={float(self.upsilon)!r}")
        lines.append(f"n_sites={self.n_sites}")
        for key in RESERVOIR_KEYS:
            lines.append(f"{key}={float(getattr(self.reservoir, key))!r}")
        lines.append(f"mode={self.mode}")
        if seed is not None:
            lines.append(f"seed={int(seed)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, cfg: Mapping[str, str]) -> "ModelParams":
        try:
            has_g = "gamma" in cfg and str(cfg["gamma"]).strip() != ""
            has_u = "upsilon" in cfg and str(cfg["upsilon"]).strip() != ""
            if has_g and has_u:
                raise ValidationError("give exactly one of gamma, upsilon")
            res = ReservoirDensities(*(float(cfg.get(k, 0.0)) for k in RESERVOIR_KEYS))
            return cls(
                sigma=int(cfg["sigma"]),
                epsilon=float(cfg["epsilon"]),
                n_sites=int(cfg["n_sites"]),
                reservoir=res,
                gamma=float(cfg["gamma"]) if has_g else None,
                upsilon=float(cfg["upsilon"]) if has_u else None,
                mode=str(cfg.get("mode", BOUNDARY_DRIVEN)).strip(),
            )
        except KeyError as exc:
            raise ValidationError(f"missing config key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed config value: {exc}") from None

    @classmethod
    def from_config(cls, text: str) -> tuple["ModelParams", int | None]:
        """Parse ``key=value`` lines; ``#`` starts a comment.

        Returns the parameters and the optional ``seed`` entry.
        """
        cfg = parse_key_values(text)
        seed = int(cfg.pop("seed")) if "seed" in cfg else None
        return cls.from_mapping(cfg), seed


def parse_key_values(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every invariant holds.

    Raises ValidationError naming the first violated invariant.
    """
    p = params
    if p.sigma not in (-1, 0, 1):
        raise ValidationError(f"sigma must be -1, 0 or 1 (got {p.sigma})")
    if not (isinstance(p.epsilon, (int, float)) and 0.0 <= p.epsilon <= 1.0):
        raise ValidationError(f"epsilon must lie in [0,1] (got {p.epsilon})")
    if p.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES} (got {p.mode!r})")
    # a single-site chain between two reservoirs is meaningful; a 1-site torus is not
    min_n = 2 if p.mode == BULK_TORUS else 1
    if int(p.n_sites) != p.n_sites or p.n_sites < min_n:
        raise ValidationError(f"n_sites must be an integer >= {min_n} (got {p.n_sites})")
    if (p.gamma is None) == (p.upsilon is None):
        raise ValidationError("exactly one of gamma, upsilon must be given")
    rate = p.gamma if p.gamma is not None else p.upsilon
    name = "gamma" if p.gamma is not None else "upsilon"
    if not (math.isfinite(rate) and rate > 0.0):
        raise ValidationError(f"{name} must be a finite positive number (got {rate})")
    for key in RESERVOIR_KEYS:
        v = getattr(p.reservoir, key)
        if not (math.isfinite(v) and v >= 0.0):
            raise ValidationError(f"{key} must be finite and >= 0 (got {v})")
        if p.sigma == -1 and v > 1.0:
            raise ValidationError(f"{key}={v}: exclusion density must be <= 1")
    return params


# --------------------------------------------------------------------------
# configurations


@dataclass
class Configuration:
    """Occupation numbers ``eta[x, i]`` for sites ``x = 0..N-1`` and layer ``i``."""

    eta: np.ndarray

    def __post_init__(self) -> None:
        self.eta = np.ascontiguousarray(np.asarray(self.eta, dtype=np.int64).reshape(-1, 2))
        if np.any(self.eta < 0):
            raise ValidationError("occupation numbers must be non-negative")

    @classmethod
    def empty(cls, n_sites: int) -> "Configuration":
        return cls(np.zeros((n_sites, 2), dtype=np.int64))

    @property
    def n_sites(self) -> int:
        return self.eta.shape[0]

    def total(self) -> int:
        return int(self.eta.sum())

    def check(self, sigma: int) -> "Configuration":
        if sigma == -1 and np.any(self.eta > 1):
            raise ValidationError("exclusion configuration has a site with more than one particle")
        return self

    def copy(self) -> "Configuration":
        return Configuration(self.eta.copy())


@dataclass
class DualConfiguration:
    """Dual particles in the bulk plus tallies absorbed at the two ends.

    ``absorbed[side, layer]`` with side 0 = L and side 1 = R.
    """

    bulk: np.ndarray
    absorbed: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.bulk = np.ascontiguousarray(np.asarray(self.bulk, dtype=np.int64).reshape(-1, 2))
        if self.absorbed is None:
            self.absorbed = np.zeros((2, 2), dtype=np.int64)
        self.absorbed = np.ascontiguousarray(np.asarray(self.absorbed, dtype=np.int64).reshape(2, 2))
        if np.any(self.bulk < 0) or np.any(self.absorbed < 0):
            raise ValidationError("dual particle counts must be non-negative")

    @classmethod
    def single(cls, n_sites: int, x: int, layer: int, count: int = 1) -> "DualConfiguration":
        """``count`` dual particles at site ``x`` (1-based) on ``layer``."""
        bulk = np.zeros((n_sites, 2), dtype=np.int64)
        bulk[x - 1, layer] = count
        return cls(bulk)

    @property
    def n_sites(self) -> int:
        return self.bulk.shape[0]

    def total(self) -> int:
        return int(self.bulk.sum() + self.absorbed.sum())

    def copy(self) -> "DualConfiguration":
        return DualConfiguration(self.bulk.copy(), self.absorbed.copy())


# --------------------------------------------------------------------------
# duality polynomial

_EXACT_LIMIT = 20


def _log_falling(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(n - k + 1)


def single_site_dual(k: int, n: int, sigma: int) -> float:
    """Single-site duality polynomial ``d(k, n)``.

    Equals ``n!/(n-k)!`` divided by ``k!`` for inclusion and by 1 otherwise,
    and vanishes when ``k > n``.
    """
    k = int(k)
    n = int(n)
    if k < 0 or n < 0:
        raise DomainError("d(k, n) needs k, n >= 0")
    if k > n:
        return 0.0
    if k == 0:
        return 1.0
    if n <= _EXACT_LIMIT:
        val = math.perm(n, k)
        if sigma == 1:
            return float(math.comb(n, k))
        return float(val)
    logv = _log_falling(n, k)
    if sigma == 1:
        logv -= math.lgamma(k + 1)
    return math.exp(logv)


def duality_weight(k: int, sigma: int) -> float:
    """Normalisation ``w(k)``: ``k!`` for inclusion, 1 otherwise."""
    return float(math.factorial(k)) if sigma == 1 else 1.0


# --------------------------------------------------------------------------
# equilibrium marginals


def check_theta(sigma: int, theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta) or theta < 0.0:
        raise DomainError(f"density {theta} outside the admissible range")
    if sigma == -1 and theta > 1.0:
        raise DomainError(f"exclusion density {theta} exceeds 1")
    return theta


def sample_equilibrium_marginal(sigma: int, theta: float, rng: np.random.Generator, size=None):
    """Draw from the reversible single-site law with mean ``theta``.

    Bernoulli for exclusion, Poisson for independent walkers, and for
    inclusion the number of failures before the first success in trials with
    success probability ``1/(1+theta)``.
    """
    theta = check_theta(sigma, theta)
    if sigma == -1:
        out = (rng.random(size) < theta).astype(np.int64)
    elif sigma == 0:
        out = rng.poisson(theta, size)
    elif sigma == 1:
        # numpy counts trials including the success
        out = rng.geometric(1.0 / (1.0 + theta), size) - 1
    else:
        raise ValidationError(f"sigma must be -1, 0 or 1 (got {sigma})")
    if size is None:
        return int(out)
    return np.asarray(out, dtype=np.int64)


def marginal_moments(sigma: int, theta: float) -> tuple[float, float]:
    """Mean and variance of the equilibrium marginal."""
    theta = check_theta(sigma, theta)
    if sigma == -1:
        return theta, theta * (1.0 - theta)
    if sigma == 0:
        return theta, theta
    return theta, theta * (1.0 + theta)


def marginal_pmf(sigma: int, theta: float, k: np.ndarray) -> np.ndarray:
    theta = check_theta(sigma, theta)
    k = np.asarray(k, dtype=float)
    if sigma == -1:
        return np.where(k == 0, 1.0 - theta, np.where(k == 1, theta, 0.0))
    if sigma == 0:
        from scipy.stats import poisson

        return poisson.pmf(k, theta)
    p = theta / (1.0 + theta)
    return (1.0 - p) * p**k


def sample_product_measure(
    params: ModelParams, profile: np.ndarray, rng: np.random.Generator
) -> Configuration:
    """Independent site-wise draws with means ``profile[x, i]``."""
    prof = np.asarray(profile, dtype=float).reshape(-1, 2)
    eta = np.empty(prof.shape, dtype=np.int64)
    for idx, th in np.ndenumerate(prof):
        eta[idx] = sample_equilibrium_marginal(params.sigma, th, rng)
    return Configuration(eta)
