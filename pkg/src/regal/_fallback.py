"""Pure numpy implementations of the hot loops.

These mirror ``_kernels.pyx`` operation for operation and are used when the
compiled extension is unavailable (or when ``REGAL_PURE=1``).
"""
import numpy as np


def inner_max_rows(v, center, radius):
    """Optimistic rows for a batch of centers.

    center has shape (R, S), radius shape (R,).  Each returned row maximizes
    ``p @ v`` over the simplex intersected with the L1 ball of the given
    radius around the corresponding center.
    """
    best = int(np.argmax(v))
    order = np.argsort(v, kind="stable")
    rows = np.array(center, dtype=np.float64, copy=True)
    give = np.minimum(0.5 * np.asarray(radius, dtype=np.float64), 1.0 - rows[:, best])
    give = np.maximum(give, 0.0)
    rows[:, best] += give
    remaining = give.copy()
    for j in order:
        if j == best:
            continue
        if not np.any(remaining > 0.0):
            break
        take = np.minimum(rows[:, j], remaining)
        rows[:, j] -= take
        remaining -= take
    return rows


def optimistic_vi(reward, center, radius, theta, tol, span_cap, max_iter, v0,
                  mode=0, stab_tol=0.0):
    S, A = reward.shape
    v = np.array(v0, dtype=np.float64, copy=True)
    flat_center = center.reshape(S * A, S)
    flat_radius = radius.reshape(S * A)
    prev_diff = None
    converged = False
    n = 0
    while True:
        rows = inner_max_rows(v, flat_center, flat_radius)
        q = theta * reward + (1.0 - theta) * v[:, None] + theta * (rows @ v).reshape(S, A)
        policy = np.argmax(q, axis=1)
        raw = q[np.arange(S), policy]
        v_next = raw
        if np.isfinite(span_cap):
            v_next = np.minimum(raw, raw.min() + span_cap)
        diff = v_next - v
        n += 1
        if diff.max() - diff.min() <= tol * theta:
            converged = True
        elif mode == 1 and prev_diff is not None:
            if np.max(np.abs(diff - prev_diff)) <= stab_tol * theta:
                converged = True
        if converged or n >= max_iter:
            break
        prev_diff = diff
        v = v_next - v_next.min()
    return (v, diff, raw, policy.astype(np.int64), rows.reshape(S, A, S), n, converged)


def run_policy(policy, cdf, reward, state, uniforms, t, t_end, threshold,
               visits, n_sas, rewards_out):
    S = cdf.shape[2]
    s = int(state)
    hit = False
    while t < t_end:
        a = int(policy[s])
        u = uniforms[t]
        row = cdf[s, a]
        s2 = S - 1
        for j in range(S):
            if row[j] > u:
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
    return s, t, hit
