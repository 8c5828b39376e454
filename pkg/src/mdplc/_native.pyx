# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled compute kernels.

Must stay a line-for-line semantic mirror of `mdplc._pykernels`: same
floating-point operation order, same splitmix64 streams, same draw
discipline, so that both backends produce bit-identical results.
"""

from libc.math cimport fabs

cdef unsigned long long _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double _UNIT = 1.0 / 9007199254740992.0  # 2^-53


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def value_sweeps(
    double[::1] x,
    unsigned char[::1] frozen,
    bint minimize,
    double[::1] a_rew,
    int[::1] sa_off,
    int[::1] ae_off,
    int[::1] e_dst,
    double[::1] e_prob,
    double tol,
    long max_iter,
):
    cdef Py_ssize_t ns = x.shape[0]
    cdef double[::1] old = x.copy()
    cdef long it = 0
    cdef double resid = float("inf")
    cdef Py_ssize_t s, a, e
    cdef int lo, hi
    cdef double best, q, diff
    cdef bint first
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
            diff = fabs(best - old[s])
            if diff > resid:
                resid = diff
        it += 1
        if resid < tol:
            break
    return it, resid


def run_trials(
    long trials,
    long max_steps,
    unsigned long long seed,
    int mode,
    double param,
    int[::1] pol_slot,
    unsigned char[::1] goal,
    int[::1] sa_off,
    int[::1] ae_off,
    int[::1] e_dst,
    double[::1] e_prob,
    long long[::1] slot_counts,
    unsigned char[::1] out_success,
    int[::1] out_steps,
):
    cdef long successes = 0
    cdef long long total_actions = 0
    cdef long trial, actions
    cdef unsigned long long st, w
    cdef Py_ssize_t s, lo, hi, n, slot, pol_pos, k, e, chosen
    cdef double u, cum
    cdef bint success
    for trial in range(trials):
        st = seed ^ ((<unsigned long long> (trial + 1)) * _GOLDEN)
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
                st = st + _GOLDEN
                w = _mix64(st)
                if (w >> 11) * _UNIT < param:
                    st = st + _GOLDEN
                    w = _mix64(st)
                    k = <Py_ssize_t> (((w >> 11) * _UNIT) * (n - 1))
                    if k >= n - 1:
                        k = n - 2
                    pol_pos = slot - lo
                    slot = lo + (k if k < pol_pos else k + 1)
            elif mode == 2 and param > 0.0:
                st = st + _GOLDEN
                w = _mix64(st)
                if (w >> 11) * _UNIT < param:
                    st = st + _GOLDEN
                    w = _mix64(st)
                    k = <Py_ssize_t> (((w >> 11) * _UNIT) * n)
                    if k >= n:
                        k = n - 1
                    slot = lo + k
            slot_counts[slot] += 1
            actions += 1
            total_actions += 1
            st = st + _GOLDEN
            w = _mix64(st)
            u = (w >> 11) * _UNIT
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
