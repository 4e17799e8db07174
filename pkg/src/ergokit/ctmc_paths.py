"""Event-driven path simulation of finite CTMCs.

These estimators share no code with :mod:`ergokit.ctmc`; they exist to check
the linear-algebra answers by sampling.
"""

from __future__ import annotations

import numpy as np

from .ctmc import as_rate_matrix, transition_semigroup
from .errors import CensoredError
from .measures import as_finite_set, as_weight
from .montecarlo import path_blocks, summarize

T_CAP = 1e3


def _jump_tables(q):
    rates = -np.diag(q).copy()
    jump = np.where(np.eye(len(q), dtype=bool), 0.0, q)
    with np.errstate(invalid="ignore", divide="ignore"):
        jump = np.where(rates[:, None] > 0, jump / rates[:, None], 0.0)
    return rates, np.cumsum(jump, axis=1)


def _next_state(cum, x, u):
    return np.minimum((u[:, None] > cum[x]).sum(axis=1), cum.shape[1] - 1)


def mc_ctmc_hitting(Q, f, B, r, x0, n_paths, seed, T_cap=T_CAP):
    """Estimate ``E_x0 int_0^{tau_B(r)} f(Phi_t) dt`` from simulated paths."""
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    inB = as_finite_set(B, Q.n).mask
    rates, cum = _jump_tables(Q.q)
    values = np.empty(n_paths)
    censored = 0
    for start, stop, (rng,) in path_blocks(seed, n_paths):
        m = stop - start
        x = np.full(m, int(x0))
        t = np.zeros(m)
        acc = np.zeros(m)
        active = np.ones(m, dtype=bool)
        while active.any():
            idx = np.flatnonzero(active)
            xi, ti = x[idx], t[idx]
            done_now = (ti >= r) & inB[xi]
            with np.errstate(divide="ignore"):
                hold = rng.exponential(1.0, idx.size) / rates[xi]
            u = rng.random(idx.size)
            crosses = (ti < r) & (ti + hold >= r) & inB[xi]
            stop_at_r = crosses & ~done_now
            acc[idx[stop_at_r]] += fv[xi[stop_at_r]] * (r - ti[stop_at_r])
            move = ~done_now & ~stop_at_r
            mi = idx[move]
            acc[mi] += fv[xi[move]] * hold[move]
            t[mi] += hold[move]
            x[mi] = _next_state(cum, xi[move], u[move])
            active[idx[done_now | stop_at_r]] = False
            capped = active & (t > T_cap)
            censored += int(capped.sum())
            active &= ~capped
        values[start:stop] = acc
    if censored == n_paths:
        raise CensoredError("every path exceeded the censoring cap")
    return summarize(values, censored)


def mc_ctmc_lyapunov(Q, f, C, x0, n_paths, seed, T_cap=T_CAP):
    """Estimate ``E_x0 int_0^{tau~_C} f(Phi_t) dt``, where ``tau~_C`` is the time the
    occupation of ``C`` reaches an independent unit exponential clock."""
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    inC = as_finite_set(C, Q.n).mask
    rates, cum = _jump_tables(Q.q)
    values = np.empty(n_paths)
    censored = 0
    for start, stop, (rng, clock_rng) in path_blocks(seed, n_paths, streams=2):
        m = stop - start
        clock = clock_rng.exponential(1.0, m)
        x = np.full(m, int(x0))
        t = np.zeros(m)
        occ = np.zeros(m)
        acc = np.zeros(m)
        active = np.ones(m, dtype=bool)
        while active.any():
            idx = np.flatnonzero(active)
            xi = x[idx]
            with np.errstate(divide="ignore"):
                hold = rng.exponential(1.0, idx.size) / rates[xi]
            u = rng.random(idx.size)
            need = clock[idx] - occ[idx]
            rings = inC[xi] & (hold >= need)
            step = np.where(rings, need, hold)
            acc[idx] += fv[xi] * step
            t[idx] += step
            occ[idx] += np.where(inC[xi], step, 0.0)
            move = ~rings
            x[idx[move]] = _next_state(cum, xi[move], u[move])
            active[idx[rings]] = False
            capped = active & (t > T_cap)
            censored += int(capped.sum())
            active &= ~capped
        values[start:stop] = acc
    if censored == n_paths:
        raise CensoredError("every path exceeded the censoring cap")
    return summarize(values, censored)


def mc_skeleton_hitting_sum(Q, delta, weights, B, x0, n_paths, seed, first_index=1, max_steps=100_000):
    """Estimate ``E_x0 sum_{i=0}^{T} w(X(i))`` by sampling the Delta-skeleton directly."""
    Q = as_rate_matrix(Q)
    w = np.asarray(weights, dtype=float)
    inB = as_finite_set(B, Q.n).mask
    cum = np.cumsum(transition_semigroup(Q, delta).p, axis=1)
    values = np.empty(n_paths)
    for start, stop, (rng,) in path_blocks(seed, n_paths):
        m = stop - start
        x = np.full(m, int(x0))
        acc = w[x].copy()
        active = ~(inB[x]) if first_index == 0 else np.ones(m, dtype=bool)
        for _ in range(max_steps):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            x[idx] = _next_state(cum, x[idx], rng.random(idx.size))
            acc[idx] += w[x[idx]]
            active[idx[inB[x[idx]]]] = False
        values[start:stop] = acc
    return summarize(values)
