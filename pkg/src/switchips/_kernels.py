"""Compiled event-driven kernels for the two-layer particle system.

Event index layout (``ip`` holds the offsets)::

    [0, 2*nb)            hops on layer 0, index 2*b + d over bonds b
    [2*nb, 2*nb + nh1)   hops on layer 1 (nh1 = 0 when epsilon = 0)
    next 2*N             switches, index 2*x + i  (layer i -> 1-i at site x)
    next 4               injections L0, L1, R0, R1   (boundary mode only)
    next 4               absorptions L0, L1, R0, R1  (boundary mode only)

Bond b joins site b to site b+1 (mod N on the torus); direction d = 0 moves a
particle from b to b+1, d = 1 the other way.

The rate table is one float array ``tab``: ``nev`` rates, then a Fenwick tree
of ``nev + 1`` slots, then the 5 category subtotals. Hot-path helpers take
few array arguments because each one costs reference counting per call.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# float params: sigma, eps, gamma, rho_L0, rho_L1, rho_R0, rho_R1
P_SIGMA, P_EPS, P_GAMMA, P_RHO = 0, 1, 2, 3
# int params
I_N = 0
I_TORUS = 1
I_NB = 2
I_OFF1 = 3
I_NH1 = 4
I_OFFSW = 5
I_OFFINJ = 6
I_NINJ = 7
I_OFFABS = 8
I_NEV = 9
I_TREE = 10

CAT_HOP0, CAT_HOP1, CAT_SWITCH, CAT_INJECT, CAT_ABSORB = 0, 1, 2, 3, 4

ST_OK, ST_HALTED, ST_NONTERM, ST_CAP, ST_DRIFT, ST_EXCLUSION = 0, 1, 2, 3, 4, 5

TREE_THRESHOLD = 64


def layout(n_sites: int, torus: bool, epsilon: float) -> np.ndarray:
    nb = n_sites if torus else n_sites - 1
    nh1 = 2 * nb if epsilon > 0.0 else 0
    off1 = 2 * nb
    offsw = off1 + nh1
    offinj = offsw + 2 * n_sites
    ninj = 0 if torus else 4
    offabs = offinj + ninj
    nev = offabs + ninj
    use_tree = 1 if n_sites > TREE_THRESHOLD else 0
    return np.array(
        [n_sites, int(torus), nb, off1, nh1, offsw, offinj, ninj, offabs, nev, use_tree],
        dtype=np.int64,
    )


def float_params(sigma: int, epsilon: float, gamma: float, rho) -> np.ndarray:
    out = np.zeros(7)
    out[0] = sigma
    out[1] = epsilon
    out[2] = gamma
    out[3:7] = rho
    return out


def table_size(ip: np.ndarray) -> int:
    return 2 * int(ip[I_NEV]) + 6


# ---------------------------------------------------------------- helpers


@njit(cache=True)
def decode(ev, n, off1, offsw, offinj, offabs):
    """Map an event index to (category, site a, site b, layer, bond, sign, slot).

    Hops move a particle from a to b; ``sign`` is +1 for a rightward bond
    crossing. Reservoir events carry ``slot`` 0..3 (L0, L1, R0, R1) and b = -1.
    """
    if ev < offsw:
        if ev < off1:
            c = CAT_HOP0
            layer = 0
            k = ev
        else:
            c = CAT_HOP1
            layer = 1
            k = ev - off1
        bnd = k >> 1
        x = bnd
        y = bnd + 1
        if y >= n:
            y = 0
        if k & 1:
            return c, y, x, layer, bnd, -1, -1
        return c, x, y, layer, bnd, 1, -1
    if ev < offinj:
        k = ev - offsw
        return CAT_SWITCH, k >> 1, -1, k & 1, -1, 0, -1
    if ev < offabs:
        k = ev - offinj
        c = CAT_INJECT
    else:
        k = ev - offabs
        c = CAT_ABSORB
    site = 0 if k < 2 else n - 1
    return c, site, -1, k & 1, -1, 0, k


@njit(cache=True)
def build_table(eta, fp, ip, tab):
    """Recompute every rate, the tree and the subtotals; returns the total."""
    n = ip[I_N]
    nev = ip[I_NEV]
    sigma = fp[P_SIGMA]
    tree0 = nev
    cat0 = 2 * nev + 1
    for c in range(5):
        tab[cat0 + c] = 0.0
    for ev in range(nev):
        c, a, b, i, bnd, sgn, slot = decode(ev, n, ip[I_OFF1], ip[I_OFFSW], ip[I_OFFINJ], ip[I_OFFABS])
        if c == CAT_HOP0:
            r = eta[a, i] * (1.0 + sigma * eta[b, i])
        elif c == CAT_HOP1:
            r = fp[P_EPS] * eta[a, i] * (1.0 + sigma * eta[b, i])
        elif c == CAT_SWITCH:
            r = fp[P_GAMMA] * eta[a, i] * (1.0 + sigma * eta[a, 1 - i])
        elif c == CAT_INJECT:
            r = fp[P_RHO + slot] * (1.0 + sigma * eta[a, i])
        else:
            r = eta[a, i] * (1.0 + sigma * fp[P_RHO + slot])
        tab[ev] = r
        tab[cat0 + c] += r
    if ip[I_TREE]:
        for j in range(nev + 1):
            tab[tree0 + j] = 0.0
        for j in range(1, nev + 1):
            tab[tree0 + j] += tab[j - 1]
            p = j + (j & (-j))
            if p <= nev:
                tab[tree0 + p] += tab[tree0 + j]
    total = 0.0
    for c in range(5):
        total += tab[cat0 + c]
    return total


@njit(cache=True)
def table_total(tab, ip):
    cat0 = 2 * ip[I_NEV] + 1
    return tab[cat0] + tab[cat0 + 1] + tab[cat0 + 2] + tab[cat0 + 3] + tab[cat0 + 4]


@njit(cache=True)
def select_event(u, tab, ip):
    """Event whose cumulative-rate interval contains ``u``; -1 if all rates are 0."""
    nev = ip[I_NEV]
    if ip[I_TREE]:
        tree0 = nev
        pos = 0
        step = 1
        while step * 2 <= nev:
            step *= 2
        v = u
        while step > 0:
            nxt = pos + step
            if nxt <= nev and tab[tree0 + nxt] <= v:
                pos = nxt
                v -= tab[tree0 + nxt]
            step >>= 1
        if pos < nev and tab[pos] > 0.0:
            return pos
    # linear scan; also the fallback when roundoff lands on a zero rate
    acc = 0.0
    last = -1
    for ev in range(nev):
        r = tab[ev]
        if r > 0.0:
            acc += r
            last = ev
            if u < acc:
                return ev
    return last


@njit(cache=True)
def apply_and_refresh(ev, eta, absorbed, fp, ip, tab):
    """Perform event ``ev`` and refresh every rate touching the changed sites.

    Returns the decoded event (see :func:`decode`).
    """
    n = ip[I_N]
    torus = ip[I_TORUS]
    off1 = ip[I_OFF1]
    offsw = ip[I_OFFSW]
    offinj = ip[I_OFFINJ]
    offabs = ip[I_OFFABS]
    nev = ip[I_NEV]
    use_tree = ip[I_TREE]
    has1 = ip[I_NH1] > 0
    sigma = fp[P_SIGMA]
    eps = fp[P_EPS]
    gamma = fp[P_GAMMA]
    cat0 = 2 * nev + 1
    tree0 = nev

    c, a, b, layer, bnd, sgn, slot = decode(ev, n, off1, offsw, offinj, offabs)
    if c == CAT_HOP0 or c == CAT_HOP1:
        eta[a, layer] -= 1
        eta[b, layer] += 1
    elif c == CAT_SWITCH:
        eta[a, layer] -= 1
        eta[a, 1 - layer] += 1
    elif c == CAT_INJECT:
        eta[a, layer] += 1
    else:
        eta[a, layer] -= 1
        absorbed[slot >> 1, layer] += 1

    for which in range(2):
        x = a if which == 0 else b
        if x < 0:
            continue
        for li in range(2):
            if li == 1 and not has1:
                continue
            base = 0 if li == 0 else off1
            mult = 1.0 if li == 0 else eps
            for side in range(2):
                if side == 0:
                    bb = x
                    if torus == 0 and x >= n - 1:
                        continue
                else:
                    bb = x - 1
                    if bb < 0:
                        if torus == 0:
                            continue
                        bb = n - 1
                s_hi = bb + 1
                if s_hi >= n:
                    s_hi = 0
                for d in range(2):
                    e2 = base + 2 * bb + d
                    if d == 0:
                        r = mult * eta[bb, li] * (1.0 + sigma * eta[s_hi, li])
                    else:
                        r = mult * eta[s_hi, li] * (1.0 + sigma * eta[bb, li])
                    delta = r - tab[e2]
                    if delta != 0.0:
                        tab[e2] = r
                        tab[cat0 + li] += delta
                        if use_tree:
                            j = e2 + 1
                            while j <= nev:
                                tab[tree0 + j] += delta
                                j += j & (-j)
        for i in range(2):
            e2 = offsw + 2 * x + i
            r = gamma * eta[x, i] * (1.0 + sigma * eta[x, 1 - i])
            delta = r - tab[e2]
            if delta != 0.0:
                tab[e2] = r
                tab[cat0 + CAT_SWITCH] += delta
                if use_tree:
                    j = e2 + 1
                    while j <= nev:
                        tab[tree0 + j] += delta
                        j += j & (-j)
        if torus == 0 and (x == 0 or x == n - 1):
            for k in range(4):
                sx = 0 if k < 2 else n - 1
                if sx != x:
                    continue
                i = k & 1
                for kind in range(2):
                    if kind == 0:
                        e2 = offinj + k
                        r = fp[P_RHO + k] * (1.0 + sigma * eta[x, i])
                        cc = CAT_INJECT
                    else:
                        e2 = offabs + k
                        r = eta[x, i] * (1.0 + sigma * fp[P_RHO + k])
                        cc = CAT_ABSORB
                    delta = r - tab[e2]
                    if delta != 0.0:
                        tab[e2] = r
                        tab[cat0 + cc] += delta
                        if use_tree:
                            j = e2 + 1
                            while j <= nev:
                                tab[tree0 + j] += delta
                                j += j & (-j)
    return c, a, b, layer, bnd, sgn, slot


# ---------------------------------------------------------------- stepping


@njit(cache=True)
def gillespie_step(eta, absorbed, fp, ip, tab, rng):
    """One exact step. Returns (elapsed, event) or (inf, -1) when stuck."""
    total = table_total(tab, ip)
    if total <= 1e-9:
        total = build_table(eta, fp, ip, tab)
        if total <= 0.0:
            return np.inf, -1
    dt = rng.standard_exponential() / total
    ev = select_event(rng.random() * total, tab, ip)
    if ev < 0:
        return np.inf, -1
    apply_and_refresh(ev, eta, absorbed, fp, ip, tab)
    return dt, ev


@njit(cache=True)
def evolve(
    eta, absorbed, fp, ip, tab,
    t0, t_end, burn_in, nbatch,
    occ, pw, cross, rflux, pairs, pocc, last_t, plast,
    rng, max_events, cap, check_every,
):
    """Run from ``t0`` until ``t_end`` (``inf``: until no transition is left).

    With ``nbatch > 0`` time integrals over ``[burn_in, t_end]`` are split
    into equal batches; integrals are updated lazily per site. Returns (time
    reached, events, status, largest relative table drift seen).
    """
    n = ip[I_N]
    off1 = ip[I_OFF1]
    offsw = ip[I_OFFSW]
    offinj = ip[I_OFFINJ]
    offabs = ip[I_OFFABS]
    sigma = fp[P_SIGMA]
    npairs = pairs.shape[0]
    total = build_table(eta, fp, ip, tab)
    t = t0
    nev = 0
    since_check = 0
    drift = 0.0
    acc = nbatch > 0
    cur = -1
    blen = 0.0
    if acc:
        blen = (t_end - burn_in) / nbatch
        for x in range(n):
            last_t[x, 0] = t0
            last_t[x, 1] = t0
        for p in range(npairs):
            plast[p] = t0
        if t0 >= burn_in:
            cur = 0
    status = ST_OK
    while True:
        total = table_total(tab, ip)
        if total <= 1e-9:
            total = build_table(eta, fp, ip, tab)
        if total <= 0.0:
            t_next = np.inf
        else:
            t_next = t + rng.standard_exponential() / total
        if acc:
            # close every accumulation window ending before the next jump
            while cur < nbatch:
                if cur < 0:
                    edge = burn_in
                elif cur + 1 == nbatch:
                    edge = t_end
                else:
                    edge = burn_in + (cur + 1) * blen
                if t_next <= edge:
                    break
                for x in range(n):
                    for i in range(2):
                        if cur >= 0:
                            h = edge - last_t[x, i]
                            v = float(eta[x, i])
                            occ[cur, x, i] += v * h
                            v2 = v * v
                            pw[x, i, 0] += v * h
                            pw[x, i, 1] += v2 * h
                            pw[x, i, 2] += v2 * v * h
                            pw[x, i, 3] += v2 * v2 * h
                        last_t[x, i] = edge
                for p in range(npairs):
                    if cur >= 0:
                        v = float(eta[pairs[p, 0], pairs[p, 1]]) * float(eta[pairs[p, 2], pairs[p, 3]])
                        pocc[cur, p] += v * (edge - plast[p])
                    plast[p] = edge
                cur += 1
        if total <= 0.0:
            status = ST_HALTED
            break
        if t_next > t_end:
            t = t_end
            break
        if nev >= max_events:
            status = ST_NONTERM
            break
        ev = select_event(rng.random() * total, tab, ip)
        if ev < 0:
            # only roundoff residue was left in the subtotals
            build_table(eta, fp, ip, tab)
            continue
        t = t_next
        if acc:
            c, a, b, layer, bnd, sgn, slot = decode(ev, n, off1, offsw, offinj, offabs)
            # integrate the pre-jump values of the sites about to change
            for which in range(2):
                x = a if which == 0 else b
                if x < 0:
                    continue
                for i in range(2):
                    if cur >= 0:
                        h = t - last_t[x, i]
                        v = float(eta[x, i])
                        occ[cur, x, i] += v * h
                        v2 = v * v
                        pw[x, i, 0] += v * h
                        pw[x, i, 1] += v2 * h
                        pw[x, i, 2] += v2 * v * h
                        pw[x, i, 3] += v2 * v2 * h
                    last_t[x, i] = t
                for p in range(npairs):
                    if pairs[p, 0] == x or pairs[p, 2] == x:
                        if cur >= 0:
                            v = float(eta[pairs[p, 0], pairs[p, 1]]) * float(eta[pairs[p, 2], pairs[p, 3]])
                            pocc[cur, p] += v * (t - plast[p])
                        plast[p] = t
        c, a, b, layer, bnd, sgn, slot = apply_and_refresh(ev, eta, absorbed, fp, ip, tab)
        nev += 1
        if acc and cur >= 0:
            if sgn != 0:
                cross[cur, bnd, layer] += sgn
            elif c == CAT_INJECT:
                rflux[cur, slot >> 1, layer] += 1
            elif c == CAT_ABSORB:
                rflux[cur, slot >> 1, layer] -= 1
        if sigma == -1.0:
            if eta[a, 0] > 1 or eta[a, 1] > 1 or (b >= 0 and eta[b, layer] > 1):
                status = ST_EXCLUSION
                break
        if eta[a, 0] > cap or eta[a, 1] > cap or (b >= 0 and eta[b, layer] > cap):
            status = ST_CAP
            break
        since_check += 1
        if since_check >= check_every:
            since_check = 0
            inc = table_total(tab, ip)
            fresh = build_table(eta, fp, ip, tab)
            rel = abs(inc - fresh) / max(abs(fresh), 1e-300)
            if rel > drift:
                drift = rel
            if rel > 1e-9:
                status = ST_DRIFT
                break
    return t, nev, status, drift


@njit(cache=True)
def run_replicas(eta0, fp, ip, t_end, n_rep, rng, max_events, cap):
    """Evolve ``n_rep`` independent copies of ``eta0`` up to ``t_end``.

    Returns final configurations, absorbed tallies and a status per replica.
    """
    n = eta0.shape[0]
    finals = np.empty((n_rep, n, 2), dtype=np.int64)
    absd = np.zeros((n_rep, 2, 2), dtype=np.int64)
    stats = np.empty(n_rep, dtype=np.int64)
    tab = np.zeros(2 * ip[I_NEV] + 6)
    occ = np.zeros((0, n, 2))
    pw = np.zeros((n, 2, 4))
    cross = np.zeros((0, max(ip[I_NB], 1), 2))
    rflux = np.zeros((0, 2, 2))
    pairs = np.zeros((0, 4), dtype=np.int64)
    pocc = np.zeros((0, 0))
    last_t = np.zeros((n, 2))
    plast = np.zeros(0)
    eta = np.empty_like(eta0)
    ab = np.zeros((2, 2), dtype=np.int64)
    for r in range(n_rep):
        eta[:, :] = eta0
        ab[:, :] = 0
        _, _, st, _ = evolve(
            eta, ab, fp, ip, tab, 0.0, t_end, 0.0, 0,
            occ, pw, cross, rflux, pairs, pocc, last_t, plast,
            rng, max_events, cap, 1 << 40,
        )
        finals[r] = eta
        absd[r] = ab
        stats[r] = st
    return finals, absd, stats
