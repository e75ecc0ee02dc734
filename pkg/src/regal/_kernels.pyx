# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled optimistic value iteration and episode rollout."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()


cdef void _ascending_order(double[::1] v, Py_ssize_t[::1] order) noexcept nogil:
    # stable insertion sort; S is small
    cdef Py_ssize_t n = v.shape[0], i, j, key
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        key = order[i]
        j = i - 1
        while j >= 0 and v[order[j]] > v[key]:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key


def optimistic_vi(const double[:, ::1] reward, const double[:, :, ::1] center,
                  const double[:, ::1] radius, double theta, double tol,
                  double span_cap, long max_iter, v0, int mode=0,
                  double stab_tol=0.0):
    cdef Py_ssize_t S = reward.shape[0], A = reward.shape[1]
    cdef Py_ssize_t s, a, j, k, best
    cdef double give, remaining, take, dot, q, qbest, lo, hi, cap, dmax, dmin, stab
    cdef bint truncate = isfinite(span_cap)
    cdef bint converged = False
    cdef bint have_prev = False
    cdef long n = 0

    v_arr = np.array(v0, dtype=np.float64, copy=True)
    rows_arr = np.empty((S, A, S), dtype=np.float64)
    raw_arr = np.empty(S, dtype=np.float64)
    nxt_arr = np.empty(S, dtype=np.float64)
    diff_arr = np.empty(S, dtype=np.float64)
    prev_arr = np.zeros(S, dtype=np.float64)
    pol_arr = np.zeros(S, dtype=np.int64)
    order_arr = np.empty(S, dtype=np.intp)

    cdef double[::1] v = v_arr
    cdef double[:, :, ::1] rows = rows_arr
    cdef double[::1] raw = raw_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] diff = diff_arr
    cdef double[::1] prev = prev_arr
    cdef long long[::1] pol = pol_arr
    cdef Py_ssize_t[::1] order = order_arr

    with nogil:
        while True:
            best = 0
            for s in range(1, S):
                if v[s] > v[best]:
                    best = s
            _ascending_order(v, order)
            for s in range(S):
                qbest = 0.0
                for a in range(A):
                    for j in range(S):
                        rows[s, a, j] = center[s, a, j]
                    give = 0.5 * radius[s, a]
                    if give > 1.0 - rows[s, a, best]:
                        give = 1.0 - rows[s, a, best]
                    if give < 0.0:
                        give = 0.0
                    rows[s, a, best] += give
                    remaining = give
                    for k in range(S):
                        if remaining <= 0.0:
                            break
                        j = order[k]
                        if j == best:
                            continue
                        take = rows[s, a, j]
                        if take > remaining:
                            take = remaining
                        rows[s, a, j] -= take
                        remaining -= take
                    dot = 0.0
                    for j in range(S):
                        dot += rows[s, a, j] * v[j]
                    q = theta * reward[s, a] + (1.0 - theta) * v[s] + theta * dot
                    if a == 0 or q > qbest:
                        qbest = q
                        pol[s] = a
                raw[s] = qbest
            lo = raw[0]
            for s in range(1, S):
                if raw[s] < lo:
                    lo = raw[s]
            cap = lo + span_cap
            for s in range(S):
                nxt[s] = raw[s]
                if truncate and nxt[s] > cap:
                    nxt[s] = cap
            dmax = nxt[0] - v[0]
            dmin = dmax
            stab = 0.0
            for s in range(S):
                diff[s] = nxt[s] - v[s]
                if diff[s] > dmax:
                    dmax = diff[s]
                if diff[s] < dmin:
                    dmin = diff[s]
                if fabs(diff[s] - prev[s]) > stab:
                    stab = fabs(diff[s] - prev[s])
            n += 1
            if dmax - dmin <= tol * theta:
                converged = True
            elif mode == 1 and have_prev and stab <= stab_tol * theta:
                converged = True
            if converged or n >= max_iter:
                break
            for s in range(S):
                prev[s] = diff[s]
            have_prev = True
            lo = nxt[0]
            for s in range(1, S):
                if nxt[s] < lo:
                    lo = nxt[s]
            for s in range(S):
                v[s] = nxt[s] - lo

    return (v_arr, diff_arr, raw_arr, pol_arr, rows_arr, n, bool(converged))


def run_policy(const long long[::1] policy, const double[:, :, ::1] cdf,
               const double[:, ::1] reward, long state, const double[::1] uniforms,
               long t, long t_end, const long long[:, ::1] threshold,
               long long[:, ::1] visits, long long[:, :, ::1] n_sas,
               double[::1] rewards_out):
    cdef Py_ssize_t S = cdf.shape[2]
    cdef Py_ssize_t s = state, a, j, s2
    cdef double u
    cdef bint hit = False
    with nogil:
        while t < t_end:
            a = policy[s]
            u = uniforms[t]
            s2 = S - 1
            for j in range(S):
                if cdf[s, a, j] > u:
                    s2 = j
                    break
            rewards_out[t] = reward[s, a]
            visits[s, a] += 1
            n_sas[s, a, s2] += 1
            t += 1
            if visits[s, a] >= threshold[s, a]:
                hit = True
            s = s2
            if hit:
                break
    return s, t, bool(hit)
