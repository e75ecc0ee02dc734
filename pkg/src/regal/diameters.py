"""Expected hitting times and diameter-like quantities of an MDP."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import Mdp, all_policies, check_policy, policy_gain, solve_gain_bias

INF = math.inf
SSP_TOL = 1e-10
DIVERGENCE = 1e12
ENUM_LIMIT = 10**6
ARGMAX_TIE_TOL = 1e-7


def _proper_states(transition: np.ndarray, target: int):
    """States from which some policy reaches ``target`` with probability one.

    Returns ``(mask, allowed)`` where ``allowed[s, a]`` marks actions whose
    support stays inside the mask.
    """
    S = transition.shape[0]
    support = transition > 0.0
    inside = np.ones(S, dtype=bool)
    while True:
        allowed = ~np.any(support & ~inside[None, None, :], axis=2)
        allowed &= inside[:, None]
        reach = np.zeros(S, dtype=bool)
        reach[target] = True
        while True:
            hits = np.any(support & reach[None, None, :], axis=2) & allowed
            new = reach | hits.any(axis=1)
            if np.array_equal(new, reach):
                break
            reach = new
        reach &= inside
        reach[target] = True
        if np.array_equal(reach, inside):
            return inside, allowed
        inside = reach


def _solve_chain(p: np.ndarray, target: int, mask: np.ndarray) -> np.ndarray:
    S = p.shape[0]
    out = np.full(S, INF)
    out[target] = 0.0
    idx = np.flatnonzero(mask & (np.arange(S) != target))
    if idx.size:
        q = p[np.ix_(idx, idx)]
        try:
            sol = np.linalg.solve(np.eye(idx.size) - q, np.ones(idx.size))
        except np.linalg.LinAlgError:
            return out
        out[idx] = sol
    return out


def hitting_times(m: Mdp, policy, target: int) -> np.ndarray:
    """Expected steps for ``policy`` to first reach ``target`` from each state (inf if never)."""
    policy = check_policy(m, policy)
    _, p = m.policy_chain(policy)
    mask, _ = _proper_states(p[:, None, :], target)
    return _solve_chain(p, target, mask)


def hitting_matrix(m: Mdp, policy) -> np.ndarray:
    """T[s1, s2] for every ordered pair under a fixed policy."""
    return np.column_stack([hitting_times(m, policy, s2) for s2 in range(m.num_states)])


def min_hitting_time(m: Mdp, target: int, tol: float = SSP_TOL, max_iter: int = 10**7) -> np.ndarray:
    """min over policies of the expected hitting time of ``target``.

    Value iteration on W(s) = 1 + min_a P_{s,a} . W restricted to states that
    can reach the target almost surely; everything else is inf.
    """
    S = m.num_states
    mask, allowed = _proper_states(m.transition, target)
    w = np.zeros(S)
    big = np.where(allowed, 0.0, INF)
    active = mask.copy()
    active[target] = False
    for _ in range(max_iter):
        q = 1.0 + m.transition @ w + big
        new = np.where(active, q.min(axis=1), 0.0)
        step = np.max(np.abs(new - w))
        w = new
        if step <= tol:
            break
        if np.any(w > DIVERGENCE):
            break
    w = np.where(w > DIVERGENCE, INF, w)
    out = np.where(mask, w, INF)
    out[target] = 0.0
    # polish with an exact solve of the greedy policy
    q = 1.0 + m.transition @ np.where(np.isfinite(out), out, 0.0) + big
    greedy = np.argmin(q, axis=1)
    p = m.transition[np.arange(S), greedy]
    exact = _solve_chain(p, target, mask)
    fin = np.isfinite(out)
    if np.all(np.isfinite(exact[fin])) and np.all(np.abs(exact[fin] - out[fin]) <= 1e-6 * (1.0 + out[fin])):
        out[fin] = exact[fin]
    return out


def _max_offdiag(mat: np.ndarray) -> float:
    S = mat.shape[0]
    if S < 2:
        return 0.0
    off = ~np.eye(S, dtype=bool)
    return float(mat[off].max())


def diameter(m: Mdp) -> float:
    """max over ordered pairs s1 != s2 of the minimal expected travel time."""
    cols = [min_hitting_time(m, s2) for s2 in range(m.num_states)]
    return _max_offdiag(np.column_stack(cols))


def bias_argmax(bias, tie_tol: float = ARGMAX_TIE_TOL) -> int:
    bias = np.asarray(bias)
    return int(np.flatnonzero(bias >= bias.max() - tie_tol)[0])


def one_way_diameter(m: Mdp, tol: float = 1e-10):
    """(D_ow, s_bar): worst minimal travel time into the bias-maximizing state."""
    gb = solve_gain_bias(m, tol=tol)
    s_bar = bias_argmax(gb.bias)
    return float(min_hitting_time(m, s_bar).max()), s_bar


def _enumerate(m: Mdp):
    return all_policies(m, limit=ENUM_LIMIT)


def d_worst(m: Mdp) -> float:
    return max(_max_offdiag(hitting_matrix(m, pi)) for pi in _enumerate(m))


def d_opt(m: Mdp, gain_tol: float = 1e-8) -> float:
    """Best worst-pair travel time among average-reward optimal policies."""
    policies = _enumerate(m)
    lam = solve_gain_bias(m, tol=1e-11).gain
    best = INF
    for pi in policies:
        if policy_gain(m, pi, tol=1e-11).min() >= lam - gain_tol:
            best = min(best, _max_offdiag(hitting_matrix(m, pi)))
    return best


@dataclass
class BiasHittingReport:
    passed: bool
    worst_slack: float
    worst_case: tuple | None
    policies_checked: int
    mode: str
    gain: float
    bias: np.ndarray = field(repr=False)


def verify_bias_hitting_bound(m: Mdp, samples: int = 1000, seed: int = 0, tol: float = 1e-6) -> BiasHittingReport:
    """Check h(s2) - h(s1) <= gain * T^pi(s1 -> s2) over policies and ordered pairs.

    Exhaustive when A^S fits the enumeration limit, otherwise ``samples``
    random policies.
    """
    gb = solve_gain_bias(m, tol=1e-11)
    h, lam = gb.bias, gb.gain
    S, A = m.num_states, m.num_actions
    if A ** S <= ENUM_LIMIT:
        policies, mode = _enumerate(m), "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        policies = [rng.integers(A, size=S) for _ in range(samples)]
        mode = "sampled"
    worst, where = INF, None
    lhs = h[None, :] - h[:, None]
    for pi in policies:
        tm = hitting_matrix(m, pi)
        with np.errstate(invalid="ignore"):
            slack = np.where(np.isfinite(tm), lam * tm - lhs, INF)
        np.fill_diagonal(slack, INF)
        i = np.unravel_index(np.argmin(slack), slack.shape)
        if slack[i] < worst:
            worst, where = float(slack[i]), (tuple(int(x) for x in pi), int(i[0]), int(i[1]))
    return BiasHittingReport(worst >= -tol, worst, where, len(policies), mode, lam, h)


@dataclass
class DiameterReport:
    span: float
    d_ow: float
    d: float
    d_worst: float | None
    d_opt: float | None
    s_bar: int
    gain: float

    def to_dict(self) -> dict:
        def fmt(x):
            if x is None:
                return None
            return "inf" if math.isinf(x) else x
        return {"span": fmt(self.span), "d_ow": fmt(self.d_ow), "d": fmt(self.d),
                "d_worst": fmt(self.d_worst), "d_opt": fmt(self.d_opt), "s_bar": self.s_bar}

    def format_text(self) -> str:
        rows = [("span", self.span), ("d_ow", self.d_ow), ("d", self.d),
                ("d_worst", self.d_worst), ("d_opt", self.d_opt), ("s_bar", self.s_bar)]
        lines = []
        for name, value in rows:
            if value is None:
                text = "n/a"
            elif isinstance(value, float) and math.isinf(value):
                text = "inf"
            elif isinstance(value, float):
                text = f"{value:.10g}"
            else:
                text = str(value)
            lines.append(f"{name:<8} {text}")
        return "\n".join(lines)


def analyze(m: Mdp) -> DiameterReport:
    gb = solve_gain_bias(m, tol=1e-10)
    s_bar = bias_argmax(gb.bias)
    d_ow = float(min_hitting_time(m, s_bar).max())
    enumerable = m.num_actions ** m.num_states <= ENUM_LIMIT
    return DiameterReport(
        span=gb.span, d_ow=d_ow, d=diameter(m),
        d_worst=d_worst(m) if enumerable else None,
        d_opt=d_opt(m) if enumerable else None,
        s_bar=s_bar, gain=gb.gain)
