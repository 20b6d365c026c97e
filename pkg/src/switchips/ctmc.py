"""Exact event-driven simulation of the forward and dual particle systems."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import HaltedError, NonterminationError, SimulationError, ValidationError
from .model import Configuration, DualConfiguration, ModelParams, validate

CATEGORY_NAMES = ("hop0", "hop1", "switch", "inject", "absorb")
DEFAULT_OCCUPANCY_CAP = 10**6
DEFAULT_MAX_EVENTS = 10**9
CHECK_EVERY = 10**6
KURTOSIS_WARN = 10.0


def default_burn_in(params: ModelParams) -> float:
    """Heuristic relaxation time ``10 N^2 / min(1, eps, gamma)``."""
    slow = min(1.0, params.switch_rate)
    if params.epsilon > 0:
        slow = min(slow, params.epsilon)
    return 10.0 * params.n_sites**2 / slow


def _prepare(params: ModelParams, dual: bool = False):
    validate(params)
    rho = np.zeros(4) if dual else params.rho
    fp = K.float_params(params.sigma, params.epsilon, params.switch_rate, rho)
    ip = K.layout(params.n_sites, params.torus, params.epsilon)
    return fp, ip


def _raise_status(status: int, where: str) -> None:
    if status == K.ST_OK or status == K.ST_HALTED:
        return
    if status == K.ST_NONTERM:
        raise NonterminationError(f"{where}: event budget exhausted")
    if status == K.ST_CAP:
        raise SimulationError(f"{where}: occupancy cap exceeded")
    if status == K.ST_DRIFT:
        raise SimulationError(f"{where}: incremental rate table drifted from recomputation")
    if status == K.ST_EXCLUSION:
        raise SimulationError(f"{where}: exclusion constraint violated")
    raise SimulationError(f"{where}: unknown status {status}")


# --------------------------------------------------------------------------
# event table


@dataclass
class EventTable:
    """Every transition of the generator with its current rate.

    ``kind``, ``site``, ``layer`` and ``direction`` describe each entry;
    ``direction`` is +1/-1 for hops to the right/left and 0 otherwise.
    ``subtotals`` follows :data:`CATEGORY_NAMES`.
    """

    params: ModelParams
    fp: np.ndarray
    ip: np.ndarray
    tab: np.ndarray

    @property
    def rates(self) -> np.ndarray:
        return self.tab[: int(self.ip[K.I_NEV])]

    @property
    def cat(self) -> np.ndarray:
        nev = int(self.ip[K.I_NEV])
        return self.tab[2 * nev + 1 : 2 * nev + 6]

    @property
    def total(self) -> float:
        return float(self.cat.sum())

    @property
    def subtotals(self) -> dict[str, float]:
        return dict(zip(CATEGORY_NAMES, map(float, self.cat)))

    def describe(self) -> list[dict]:
        ip = self.ip
        out = []
        for ev in range(int(ip[K.I_NEV])):
            c, a, b, layer, bnd, sgn, slot = K.decode(
                ev, ip[K.I_N], ip[K.I_OFF1], ip[K.I_OFFSW], ip[K.I_OFFINJ], ip[K.I_OFFABS]
            )
            rec = {"kind": CATEGORY_NAMES[c], "rate": float(self.rates[ev]), "site": int(a) + 1,
                   "layer": int(layer), "direction": int(sgn)}
            if b >= 0:
                rec["target"] = int(b) + 1
            if slot >= 0:
                rec["side"] = "LR"[slot >> 1]
            out.append(rec)
        return out

    def recompute_total(self, config: Configuration) -> float:
        fresh = np.zeros_like(self.tab)
        return float(K.build_table(config.eta, self.fp, self.ip, fresh))


def build_events(config: Configuration, params: ModelParams, dual: bool = False) -> EventTable:
    """Enumerate the transitions available from ``config``."""
    fp, ip = _prepare(params, dual)
    if config.n_sites != params.n_sites:
        raise ValidationError("configuration size does not match n_sites")
    config.check(params.sigma)
    tab = np.zeros(K.table_size(ip))
    K.build_table(config.eta, fp, ip, tab)
    return EventTable(params, fp, ip, tab)


def gillespie_step(
    config: Configuration, table: EventTable, rng: np.random.Generator,
    absorbed: np.ndarray | None = None,
) -> tuple[Configuration, float, int]:
    """Advance ``config`` in place by one transition.

    Returns the configuration, the holding time and the event index.
    """
    if absorbed is None:
        absorbed = np.zeros((2, 2), dtype=np.int64)
    dt, ev = K.gillespie_step(config.eta, absorbed, table.fp, table.ip, table.tab, rng)
    if ev < 0:
        raise HaltedError("total rate is zero")
    return config, float(dt), int(ev)


# --------------------------------------------------------------------------
# trajectory statistics


@dataclass
class TrajectoryStats:
    """Time averages accumulated over ``[burn_in, t_end]``.

    Batch arrays (first axis = batch) are kept so that independent runs can
    be merged and standard errors recomputed.
    """

    params: ModelParams
    duration: float
    batch_occ: np.ndarray  # (B, N, 2) time integrals
    batch_cross: np.ndarray  # (B, nb, 2) net signed crossings
    batch_rflux: np.ndarray  # (B, 2, 2) net inflow from reservoirs
    batch_pairs: np.ndarray  # (B, P)
    pairs: np.ndarray
    powers: np.ndarray  # (N, 2, 4) integrals of eta^k
    n_events: int
    final: Configuration
    table_drift: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def n_batches(self) -> int:
        return self.batch_occ.shape[0]

    @property
    def batch_length(self) -> float:
        return self.duration / self.n_batches

    def _mean_se(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        means = arr / self.batch_length
        m = means.mean(axis=0)
        if means.shape[0] > 1:
            se = means.std(axis=0, ddof=1) / math.sqrt(means.shape[0])
        else:
            se = np.full_like(m, np.nan)
        return m, se

    @property
    def theta_hat(self) -> np.ndarray:
        return self._mean_se(self.batch_occ)[0]

    @property
    def theta_se(self) -> np.ndarray:
        return self._mean_se(self.batch_occ)[1]

    @property
    def current_hat(self) -> np.ndarray:
        """Net particle flow per unit time across each bond and layer."""
        return self._mean_se(self.batch_cross)[0]

    @property
    def current_se(self) -> np.ndarray:
        return self._mean_se(self.batch_cross)[1]

    @property
    def reservoir_flux(self) -> tuple[np.ndarray, np.ndarray]:
        return self._mean_se(self.batch_rflux)

    @property
    def pair_hat(self) -> tuple[np.ndarray, np.ndarray]:
        return self._mean_se(self.batch_pairs)

    def moments(self) -> np.ndarray:
        """Time-averaged ``E[eta^k]``, k = 1..4, per site and layer."""
        return self.powers / self.duration

    def kurtosis(self) -> np.ndarray:
        m1, m2, m3, m4 = np.moveaxis(self.moments(), -1, 0)
        var = m2 - m1**2
        c4 = m4 - 4 * m3 * m1 + 6 * m2 * m1**2 - 3 * m1**4
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(var > 0, c4 / var**2, np.nan)


def merge_stats(items: list[TrajectoryStats]) -> TrajectoryStats:
    """Pool independent runs with equal batch lengths by stacking batches."""
    if not items:
        raise ValueError("nothing to merge")
    first = items[0]
    blen = {round(s.batch_length, 12) for s in items}
    if len(blen) != 1:
        raise ValueError("runs with different batch lengths cannot be merged")
    return TrajectoryStats(
        params=first.params,
        duration=sum(s.duration for s in items),
        batch_occ=np.concatenate([s.batch_occ for s in items]),
        batch_cross=np.concatenate([s.batch_cross for s in items]),
        batch_rflux=np.concatenate([s.batch_rflux for s in items]),
        batch_pairs=np.concatenate([s.batch_pairs for s in items]),
        pairs=first.pairs,
        powers=sum(s.powers for s in items),
        n_events=sum(s.n_events for s in items),
        final=items[-1].final,
        table_drift=max(s.table_drift for s in items),
        warnings=sorted({w for s in items for w in s.warnings}),
    )


def simulate(
    params: ModelParams,
    initial: Configuration,
    t_end: float,
    burn_in: float | None = None,
    rng: np.random.Generator | None = None,
    *,
    n_batches: int = 32,
    pairs=None,
    occupancy_cap: int = DEFAULT_OCCUPANCY_CAP,
    max_events: int = DEFAULT_MAX_EVENTS,
    check_every: int = CHECK_EVERY,
) -> TrajectoryStats:
    """Simulate the forward process and time-average over ``[burn_in, t_end]``.

    ``pairs`` is an optional list of ``(x, i, y, j)`` (1-based sites) whose
    product ``eta_i(x) eta_j(y)`` is time-averaged as well.
    """
    fp, ip = _prepare(params)
    if rng is None:
        raise ValidationError("an explicit random stream is required")
    if burn_in is None:
        burn_in = default_burn_in(params)
    if not (t_end > burn_in >= 0):
        raise ValidationError("need t_end > burn_in >= 0")
    if initial.n_sites != params.n_sites:
        raise ValidationError("configuration size does not match n_sites")
    initial.check(params.sigma)
    n = params.n_sites
    nb = int(ip[K.I_NB])
    pr = np.zeros((0, 4), dtype=np.int64) if pairs is None else np.asarray(pairs, dtype=np.int64).reshape(-1, 4).copy()
    if pr.size:
        pr[:, 0] -= 1
        pr[:, 2] -= 1
        if pr[:, [0, 2]].min() < 0 or pr[:, [0, 2]].max() >= n:
            raise ValidationError("pair sites out of range")
    eta = initial.eta.copy()
    absorbed = np.zeros((2, 2), dtype=np.int64)
    occ = np.zeros((n_batches, n, 2))
    pw = np.zeros((n, 2, 4))
    cross = np.zeros((n_batches, max(nb, 1), 2))
    rflux = np.zeros((n_batches, 2, 2))
    pocc = np.zeros((n_batches, pr.shape[0]))
    t, nevents, status, drift = K.evolve(
        eta, absorbed, fp, ip, np.zeros(K.table_size(ip)),
        0.0, float(t_end), float(burn_in), n_batches,
        occ, pw, cross, rflux, pr, pocc, np.zeros((n, 2)), np.zeros(pr.shape[0]),
        rng, max_events, occupancy_cap, check_every,
    )
    _raise_status(status, "simulate")
    if status == K.ST_HALTED and t < burn_in:
        raise HaltedError(f"absorbing state reached at t={t} before burn-in ended")
    stats = TrajectoryStats(
        params=params,
        duration=float(t_end - burn_in),
        batch_occ=occ,
        batch_cross=cross[:, :nb],
        batch_rflux=rflux,
        batch_pairs=pocc,
        pairs=pr,
        powers=pw,
        n_events=int(nevents),
        final=Configuration(eta),
        table_drift=float(drift),
    )
    if params.sigma == 1:
        kurt = stats.kurtosis()
        if np.nanmax(np.nan_to_num(kurt, nan=0.0)) > KURTOSIS_WARN:
            msg = "heavy-tailed occupations: empirical kurtosis exceeds 10"
            stats.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return stats


# --------------------------------------------------------------------------
# dual process


def simulate_dual(
    params: ModelParams,
    initial: DualConfiguration,
    rng: np.random.Generator,
    t_end: float = math.inf,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> DualConfiguration:
    """Run the dual process with absorbing ends.

    With ``t_end = inf`` it runs until every particle is absorbed and returns
    the tallies; otherwise it returns the state at ``t_end``.
    """
    if params.torus:
        raise ValidationError("the absorbing dual lives on the boundary-driven geometry")
    fp, ip = _prepare(params, dual=True)
    if initial.n_sites != params.n_sites:
        raise ValidationError("configuration size does not match n_sites")
    if math.isinf(t_end) and initial.bulk.sum() == 0:
        return initial.copy()
    bulk = initial.bulk.copy()
    absorbed = initial.absorbed.copy()
    n = params.n_sites
    e0 = np.zeros((0, n, 2))
    _, _, status, _ = K.evolve(
        bulk, absorbed, fp, ip, np.zeros(K.table_size(ip)),
        0.0, float(t_end), 0.0, 0,
        e0, np.zeros((n, 2, 4)), np.zeros((0, 1, 2)), np.zeros((0, 2, 2)),
        np.zeros((0, 4), dtype=np.int64), np.zeros((0, 0)), np.zeros((n, 2)), np.zeros(0),
        rng, max_events, DEFAULT_OCCUPANCY_CAP, 1 << 40,
    )
    _raise_status(status, "simulate_dual")
    return DualConfiguration(bulk, absorbed)


def forward_replicas(
    params: ModelParams, initial: Configuration, t: float, n_rep: int, rng: np.random.Generator
) -> np.ndarray:
    """Final configurations ``(n_rep, N, 2)`` of independent runs to time ``t``."""
    fp, ip = _prepare(params)
    initial.check(params.sigma)
    finals, _, st = K.run_replicas(
        initial.eta.copy(), fp, ip, float(t), int(n_rep), rng, DEFAULT_MAX_EVENTS, DEFAULT_OCCUPANCY_CAP
    )
    for s in np.unique(st):
        _raise_status(int(s), "forward_replicas")
    return finals


def dual_replicas(
    params: ModelParams, initial: DualConfiguration, t: float, n_rep: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Bulk states ``(n_rep, N, 2)`` and absorbed tallies ``(n_rep, 2, 2)`` of
    independent dual runs; ``t = inf`` runs to full absorption."""
    if params.torus:
        fp, ip = _prepare(params)
    else:
        fp, ip = _prepare(params, dual=True)
    bulk, absd, st = K.run_replicas(
        initial.bulk.copy(), fp, ip, float(t), int(n_rep), rng, DEFAULT_MAX_EVENTS, DEFAULT_OCCUPANCY_CAP
    )
    for s in np.unique(st):
        _raise_status(int(s), "dual_replicas")
    absd = absd + initial.absorbed[None]
    return bulk, absd


def dual_absorption_frequencies(
    params: ModelParams, x: int, layer: int, n_rep: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical absorption law of one dual particle started at ``(x, layer)``.

    Returns frequencies in the order (L0, L1, R0, R1) and their standard errors.
    """
    init = DualConfiguration.single(params.n_sites, x, layer)
    _, absd = dual_replicas(params, init, math.inf, n_rep, rng)
    counts = absd.reshape(n_rep, 4).sum(axis=0).astype(float)
    freq = counts / n_rep
    se = np.sqrt(freq * (1 - freq) / n_rep)
    return freq, se
