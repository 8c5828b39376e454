"""Pure Python compute kernels.

Reference implementation of the hot loops; `mdplc._native` (Cython) mirrors
this file exactly and both must produce bit-identical results: same
floating-point operation order, same RNG, same tie-breaking.  Keep the two
in sync when touching either.
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_UNIT = 1.0 / 9007199254740992.0  # 2^-53


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def rng_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 stream; returns (new_state, 64-bit output)."""
    state = (state + _GOLDEN) & _MASK
    return state, _mix64(state)


def rng_unit(word: int) -> float:
    return (word >> 11) * _UNIT


def value_sweeps(
    x, frozen, minimize, a_rew, sa_off, ae_off, e_dst, e_prob, tol, max_iter
):
    """Jacobi Bellman sweeps in place on x; returns (iterations, residual).

    Frozen states keep their value (goal states, qualitative 0/1 sets,
    infinite-value states).  States without actions are left unchanged.
    """
    ns = len(x)
    old = [0.0] * ns
    it = 0
    resid = math.inf
    while it < max_iter:
        for s in range(ns):
            old[s] = x[s]
        resid = 0.0
        for s in range(ns):
            if frozen[s]:
                continue
            lo = sa_off[s]
            hi = sa_off[s + 1]
            if lo == hi:
                continue
            best = 0.0
            first = True
            for a in range(lo, hi):
                q = a_rew[a]
                for e in range(ae_off[a], ae_off[a + 1]):
                    q += e_prob[e] * old[e_dst[e]]
                if first:
                    best = q
                    first = False
                elif minimize:
                    if q < best:
                        best = q
                elif q > best:
                    best = q
            x[s] = best
            diff = abs(best - old[s])
            if diff > resid:
                resid = diff
        it += 1
        if resid < tol:
            break
    return it, resid


def run_trials(
    trials,
    max_steps,
    seed,
    mode,  # 0 exact, 1 faulty, 2 epsilon-greedy
    param,
    pol_slot,
    goal,
    sa_off,
    ae_off,
    e_dst,
    e_prob,
    slot_counts,
    out_success,
    out_steps,
):
    """Seeded Monte Carlo runs of a tabular policy; returns (successes, actions).

    Each trial uses an independent splitmix64 stream derived from
    seed ^ ((trial+1) * golden).  Random draws happen only when a deviation
    is possible: the faulty executor draws when it has >= 2 actions and
    p_f > 0, the epsilon executor when epsilon > 0.  One further draw
    samples the effect branch.  This draw discipline is part of the
    cross-backend determinism contract.
    """
    successes = 0
    total_actions = 0
    for trial in range(trials):
        st = (seed ^ (((trial + 1) * _GOLDEN) & _MASK)) & _MASK
        s = 0
        actions = 0
        success = False
        while True:
            if goal[s]:
                success = True
                break
            if actions >= max_steps:
                break
            lo = sa_off[s]
            hi = sa_off[s + 1]
            n = hi - lo
            if n == 0:
                break
            slot = pol_slot[s]
            if slot < 0:
                break
            if mode == 1 and param > 0.0 and n > 1:
                st, w = rng_next(st)
                if rng_unit(w) < param:
                    st, w = rng_next(st)
                    k = int(rng_unit(w) * (n - 1))
                    if k >= n - 1:
                        k = n - 2
                    pol_pos = slot - lo
                    slot = lo + (k if k < pol_pos else k + 1)
            elif mode == 2 and param > 0.0:
                st, w = rng_next(st)
                if rng_unit(w) < param:
                    st, w = rng_next(st)
                    k = int(rng_unit(w) * n)
                    if k >= n:
                        k = n - 1
                    slot = lo + k
            slot_counts[slot] += 1
            actions += 1
            total_actions += 1
            st, w = rng_next(st)
            u = rng_unit(w)
            cum = 0.0
            chosen = ae_off[slot + 1] - 1
            for e in range(ae_off[slot], ae_off[slot + 1]):
                cum += e_prob[e]
                if u < cum:
                    chosen = e
                    break
            s = e_dst[chosen]
        out_success[trial] = 1 if success else 0
        out_steps[trial] = actions
        if success:
            successes += 1
    return successes, total_actions
