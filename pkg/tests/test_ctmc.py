import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from switchips.ctmc import (
    build_events,
    dual_absorption_frequencies,
    forward_replicas,
    gillespie_step,
    merge_stats,
    simulate,
    simulate_dual,
)
from switchips.errors import HaltedError, ValidationError
from switchips.model import Configuration, DualConfiguration, make_stream
from switchips.stationary import absorption_closed

from conftest import make_params


def brute_force_rates(eta, p, dual=False):
    """Category totals straight from the generator definition."""
    s, e, g = p.sigma, p.epsilon, p.switch_rate
    n = eta.shape[0]
    rho = np.zeros(4) if dual else p.rho
    tot = dict(hop0=0.0, hop1=0.0, switch=0.0, inject=0.0, absorb=0.0)
    bonds = [(x, x + 1) for x in range(n - 1)]
    if p.torus:
        bonds.append((n - 1, 0))
    for i in (0, 1):
        for x, y in bonds:
            r = e**i * (eta[x, i] * (1 + s * eta[y, i]) + eta[y, i] * (1 + s * eta[x, i]))
            tot[f"hop{i}"] += r
        for x in range(n):
            tot["switch"] += g * eta[x, i] * (1 + s * eta[x, 1 - i])
        if not p.torus:
            for site, side in ((0, 0), (n - 1, 1)):
                r = rho[2 * side + i]
                tot["inject"] += r * (1 + s * eta[site, i])
                tot["absorb"] += eta[site, i] * (1 + s * r)
    return tot


def random_eta(sigma, n, rng):
    hi = 2 if sigma == -1 else 5
    return rng.integers(0, hi, size=(n, 2))


@pytest.mark.parametrize("sigma", [-1, 0, 1])
@pytest.mark.parametrize("mode", ["boundary-driven", "bulk-torus"])
@pytest.mark.parametrize("eps", [0.0, 0.3, 1.0])
def test_event_table_matches_generator(sigma, mode, eps):
    rho = (0.2, 0.7, 0.9, 0.4) if sigma == -1 else (2.0, 4.0, 4.0, 2.0)
    p = make_params(sigma=sigma, eps=eps, n=6, gamma=0.7, rho=rho, mode=mode)
    rng = np.random.default_rng(sigma + 7)
    for dual in (False, True):
        for _ in range(5):
            eta = random_eta(sigma, 6, rng)
            tab = build_events(Configuration(eta), p, dual=dual)
            ref = brute_force_rates(eta, p, dual)
            for k, v in ref.items():
                assert math.isclose(tab.subtotals[k], v, rel_tol=1e-12, abs_tol=1e-12), k


@pytest.mark.parametrize("sigma", [-1, 0, 1])
def test_incremental_table_stays_consistent(sigma):
    rho = (0.2, 0.7, 0.9, 0.4) if sigma == -1 else (2.0, 4.0, 4.0, 2.0)
    p = make_params(sigma=sigma, eps=0.4, n=5, gamma=0.9, rho=rho)
    cfg = Configuration(random_eta(sigma, 5, np.random.default_rng(1)))
    tab = build_events(cfg, p)
    rng = make_stream(2, sigma + 2)
    for _ in range(2000):
        cfg, dt, ev = gillespie_step(cfg, tab, rng)
        assert dt > 0 and ev >= 0
        if sigma == -1:
            assert cfg.eta.max() <= 1
    ref = brute_force_rates(cfg.eta, p)
    for k, v in ref.items():
        assert math.isclose(tab.subtotals[k], v, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(tab.total, tab.recompute_total(cfg), rel_tol=1e-9)


@given(st.sampled_from([-1, 0, 1]), st.integers(2, 8), st.integers(0, 2**31))
def test_torus_conserves_particles(sigma, n, seed):
    p = make_params(sigma=sigma, n=n, eps=0.5, gamma=1.0, rho=(0.5, 0.5, 0.5, 0.5), mode="bulk-torus")
    rng = np.random.default_rng(seed)
    eta = random_eta(sigma, n, rng)
    if eta.sum() == 0:
        eta[0, 0] = 1
    out = forward_replicas(p, Configuration(eta), 3.0, 5, make_stream(seed, 0))
    assert np.all(out.sum(axis=(1, 2)) == eta.sum())
    assert out.min() >= 0
    if sigma == -1:
        assert out.max() <= 1


def test_empty_torus_halts():
    p = make_params(n=4, mode="bulk-torus")
    cfg = Configuration.empty(4)
    with pytest.raises(HaltedError):
        gillespie_step(cfg, build_events(cfg, p), make_stream(0))


def test_simulate_is_deterministic_per_seed():
    p = make_params(n=3)
    a = simulate(p, Configuration.empty(3), 200.0, 50.0, make_stream(9, 0))
    b = simulate(p, Configuration.empty(3), 200.0, 50.0, make_stream(9, 0))
    assert np.array_equal(a.batch_occ, b.batch_occ)
    assert a.n_events == b.n_events


def test_simulate_requires_valid_window():
    p = make_params(n=3)
    with pytest.raises(ValidationError):
        simulate(p, Configuration.empty(3), 10.0, 20.0, make_stream(0))


def test_simulate_uniform_reservoirs_gives_flat_profile():
    p = make_params(n=4, rho=(1.5, 1.5, 1.5, 1.5))
    st_ = simulate(p, Configuration.empty(4), 40_000.0, 500.0, make_stream(4, 0))
    z = (st_.theta_hat - 1.5) / st_.theta_se
    assert np.all(np.abs(z) < 5)


def test_merge_pools_batches():
    p = make_params(n=3)
    a = simulate(p, Configuration.empty(3), 300.0, 100.0, make_stream(1, 0), n_batches=8)
    b = simulate(p, Configuration.empty(3), 300.0, 100.0, make_stream(1, 1), n_batches=8)
    m = merge_stats([a, b])
    assert m.n_batches == 16
    assert np.allclose(m.theta_hat, 0.5 * (a.theta_hat + b.theta_hat))


def test_dual_runs_to_absorption():
    p = make_params(n=4)
    out = simulate_dual(p, DualConfiguration.single(4, 2, 0, 3), make_stream(0))
    assert out.bulk.sum() == 0 and out.absorbed.sum() == 3


def test_dual_on_torus_rejected():
    p = make_params(n=4, mode="bulk-torus")
    with pytest.raises(ValidationError):
        simulate_dual(p, DualConfiguration.single(4, 1, 0), make_stream(0))


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_dual_absorption_matches_closed_form(eps):
    p = make_params(n=3, eps=eps, gamma=1.0)
    exact = absorption_closed(p)
    for x in (1, 3):
        for layer in (0, 1):
            f, se = dual_absorption_frequencies(p, x, layer, 20_000, make_stream(x, layer))
            ref = (exact.p if layer == 0 else exact.q)[x - 1]
            assert np.all(np.abs(f - ref) <= 5 * np.maximum(se, 1e-3))
