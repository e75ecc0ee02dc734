"""Optimistic planning over L1 confidence sets.

Three planners share one compiled value-iteration loop:

* ``evi`` maximizes the gain over the set (extended value iteration);
* ``constrained_plan`` maximizes the gain subject to a bias-span cap, using
  span-truncated optimistic value iteration;
* ``regularized_plan`` maximizes gain - C * span by scanning a geometric grid
  of span caps.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .confidence import ConfidenceSet
from .mdp import DEFAULT_THETA, MAX_ITER, ConvergenceError, Mdp, evaluate_policy, span

PLAN_TOL = 1e-6


@dataclass
class PlanResult:
    chosen_model: Mdp
    policy: np.ndarray
    gain: float
    bias: np.ndarray
    span: float
    objective: float
    residual: float
    iterations: int
    span_cap: float = math.inf
    feasible: bool = True
    multichain: bool = False
    clipped_states: tuple = ()
    value_estimate: float = math.nan
    regularization: float = 0.0
    grid: tuple = field(default=(), repr=False)

    def summary(self) -> dict:
        return {
            "gain": self.gain, "span": self.span, "objective": self.objective,
            "policy": [int(a) for a in self.policy],
            "span_cap": None if math.isinf(self.span_cap) else self.span_cap,
            "feasible": self.feasible, "multichain": self.multichain,
            "clipped_states": list(self.clipped_states),
            "regularization": self.regularization,
        }


def inner_max(v, center_row, rho: float) -> np.ndarray:
    """argmax of p . v over the simplex intersected with the L1 ball of radius rho around center_row."""
    v = np.asarray(v, dtype=np.float64)
    center_row = np.asarray(center_row, dtype=np.float64)
    return kernels.inner_max_rows(v, center_row[None, :], np.array([rho]))[0]


def inner_min(v, center_row, rho: float) -> np.ndarray:
    return inner_max(-np.asarray(v, dtype=np.float64), center_row, rho)


@lru_cache(maxsize=None)
def _labelings(S: int):
    """Coordinate labelings (0 = zero, 1 = at center, 2 = free) with at most two free coordinates."""
    out = {0: [], 1: [], 2: []}
    for lab in itertools.product((0, 1, 2), repeat=S):
        free = [i for i, x in enumerate(lab) if x == 2]
        if len(free) <= 2:
            out[len(free)].append((np.array(lab), free))
    return out


def lp_inner_oracle(v, center_row, rho: float, tol: float = 1e-12) -> np.ndarray:
    """Exact maximizer of p . v over the same polytope by vertex enumeration.

    Every vertex has at most two coordinates that are neither 0 nor at the
    center; enumerating all such candidates and keeping the feasible ones
    yields a superset of the vertices.
    """
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(center_row, dtype=np.float64)
    S = c.size
    if S > 6:
        raise ValueError("vertex enumeration is limited to S <= 6")
    cands = []
    for nfree, labs in _labelings(S).items():
        for lab, free in labs:
            base = np.where(lab == 1, c, 0.0)
            fixed = lab != 2
            rest = 1.0 - base[fixed].sum()
            budget = rho - np.abs(base - c)[fixed].sum()
            if nfree == 0:
                cands.append(base)
            elif nfree == 1:
                p = base.copy()
                p[free[0]] = rest
                cands.append(p)
            else:
                for j, k in (free, free[::-1]):
                    # p_j above its center, p_k below, L1 budget exhausted
                    p = base.copy()
                    p[j] = 0.5 * (rest + budget + c[j] - c[k])
                    p[k] = rest - p[j]
                    if p[j] >= c[j] - tol and p[k] <= c[k] + tol:
                        cands.append(p)
    cands = np.array(cands)
    ok = ((cands >= -tol).all(axis=1)
          & (np.abs(cands.sum(axis=1) - 1.0) <= 1e-9)
          & (np.abs(cands - c).sum(axis=1) <= rho + 1e-9))
    feas = cands[ok]
    return feas[int(np.argmax(feas @ v))]


def _contig(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _run_vi(cset: ConfidenceSet, rewards, tol, theta, span_cap, max_iter, v0):
    S = cset.num_states
    v0 = np.zeros(S) if v0 is None else np.asarray(v0, dtype=np.float64)
    out = kernels.optimistic_vi(_contig(rewards), _contig(cset.center), _contig(cset.radius),
                                theta, tol, span_cap, max_iter, v0)
    v, diff, raw, pol, rows, n, ok = out
    if not ok:
        raise ConvergenceError(f"optimistic value iteration did not converge in {n} iterations",
                               diff / theta)
    return v, diff, raw, pol, rows, n


def _residual(model: Mdp, policy, gain, bias) -> float:
    r_pi, p_pi = model.policy_chain(policy)
    return float(np.max(np.abs(r_pi + p_pi @ bias - bias - gain)))


def evi(cset: ConfidenceSet, rewards, tol: float = PLAN_TOL, theta: float = DEFAULT_THETA,
        max_iter: int = MAX_ITER, v0=None) -> PlanResult:
    """Most optimistic gain over the set, with the optimistic rows and greedy policy."""
    rewards = _contig(rewards)
    v, diff, raw, pol, rows, n = _run_vi(cset, rewards, tol, theta, math.inf, max_iter, v0)
    gain = 0.5 * (diff.max() + diff.min()) / theta
    bias = v - v.min()
    model = Mdp(rewards, rows)
    return PlanResult(model, pol, float(gain), bias, span(bias), float(gain),
                      _residual(model, pol, gain, bias), int(n), value_estimate=float(gain))


def _pull_down(cset, rewards, v, rows, pol, theta, cap, states):
    """Replace rows at truncated states by in-set rows whose value equals the cap.

    Returns the states where no action admits such a row.
    """
    A = rewards.shape[1]
    stuck = []
    for s in states:
        order = [int(pol[s])] + [a for a in range(A) if a != pol[s]]
        fallback = None
        done = False
        for a in order:
            target = (cap - (1.0 - theta) * v[s] - theta * rewards[s, a]) / theta
            p_hi = rows[s, a]
            p_lo = inner_min(v, cset.center[s, a], cset.radius[s, a])
            hi, lo = float(p_hi @ v), float(p_lo @ v)
            if lo <= target <= hi:
                w = 1.0 if hi <= lo else (target - lo) / (hi - lo)
                rows[s, a] = (1.0 - w) * p_lo + w * p_hi
                pol[s] = a
                done = True
                break
            if fallback is None or lo + rewards[s, a] < fallback[0]:
                fallback = (lo + rewards[s, a], a, p_lo)
        if not done:
            _, a, p_lo = fallback
            rows[s, a] = p_lo
            pol[s] = a
            stuck.append(int(s))
    return stuck


def constrained_plan(cset: ConfidenceSet, rewards, H: float, tol: float = PLAN_TOL,
                     theta: float = DEFAULT_THETA, max_iter: int = MAX_ITER, v0=None) -> PlanResult:
    """Maximize the gain over the set subject to span(bias) <= H.

    After the truncated iteration settles, rows at truncated states are pulled
    down to the cap, and the frozen (model, policy) pair is re-evaluated so
    that the returned gain and bias solve the policy's evaluation equations.
    ``feasible`` is False when the cap could not be honored.
    """
    if H < 0:
        raise ValueError("H must be nonnegative")
    if math.isinf(H):
        return evi(cset, rewards, tol, theta, max_iter, v0)
    rewards = _contig(rewards)
    v, diff, raw, pol, rows, n = _run_vi(cset, rewards, tol, theta, H, max_iter, v0)
    estimate = 0.5 * (diff.max() + diff.min()) / theta
    cap = raw.min() + H
    truncated = np.flatnonzero(raw > cap)
    rows = rows.copy()
    pol = pol.copy()
    stuck = _pull_down(cset, rewards, v, rows, pol, theta, cap, truncated)
    model = Mdp(rewards, rows)
    gains, values, n2 = evaluate_policy(model, pol, tol=tol, theta=theta, max_iter=max_iter, v0=v)
    multichain = bool(gains.max() - gains.min() > tol)
    gain = float(gains.min()) if multichain else float(gains[0])
    sp = span(values)
    feasible = bool(not stuck and not multichain and sp <= H + tol)
    return PlanResult(model, pol, gain, values, sp, gain, _residual(model, pol, gain, values),
                      int(n + n2), span_cap=float(H), feasible=feasible, multichain=multichain,
                      clipped_states=tuple(int(s) for s in truncated), value_estimate=float(estimate))


def span_grid(cset: ConfidenceSet, C: float, tol: float = PLAN_TOL, horizon: int | None = None):
    """Span caps {0} U {tol * 2^i} up to max(S / min radius, 2 / C), capped at 2 S T."""
    S = cset.num_states
    pos = cset.radius[cset.radius > 0]
    top = S / pos.min() if pos.size else 2.0 * S
    if C > 0:
        top = max(top, 2.0 / C)
    if horizon is not None:
        top = min(top, 2.0 * S * horizon)
    grid = [0.0]
    h = tol
    while True:
        grid.append(h)
        if h >= top:
            break
        h *= 2.0
    return grid


def regularized_plan(cset: ConfidenceSet, rewards, C: float, tol: float = PLAN_TOL,
                     theta: float = DEFAULT_THETA, horizon: int | None = None,
                     max_iter: int = MAX_ITER) -> PlanResult:
    """Approximately maximize gain - C * span over the set.

    Span caps are scanned upward; the scan stops once the cap no longer binds
    (all larger caps give the same plan).  Ties go to the smaller cap.
    """
    if C < 0:
        raise ValueError("C must be nonnegative")
    if C == 0:
        res = evi(cset, rewards, tol, theta, max_iter)
        return replace(res, grid=(math.inf,))
    best = None
    tried = []
    v0 = None
    inactive = False
    for H in span_grid(cset, C, tol, horizon):
        res = constrained_plan(cset, rewards, H, tol, theta, max_iter, v0)
        res.objective = res.gain - C * res.span
        tried.append(H)
        if best is None or res.objective > best.objective:
            best = res
        v0 = res.bias
        if res.feasible and res.span < H - tol:
            inactive = True
            break
    if not inactive:
        res = evi(cset, rewards, tol, theta, max_iter, v0)
        res.objective = res.gain - C * res.span
        tried.append(math.inf)
        if res.objective > best.objective:
            best = res
    best.regularization = C
    best.grid = tuple(tried)
    return best


def regularization_slack(grid, C: float, target_span: float) -> float:
    """C times the distance from ``target_span`` up to the next finite grid cap."""
    finite = [h for h in grid if math.isfinite(h)]
    above = [h for h in finite if h >= target_span]
    if above:
        return C * (min(above) - target_span)
    if grid and math.isfinite(grid[-1]):
        # the scan stopped on a non-binding cap below target_span
        return 0.0
    return math.inf
