"""Tabular MDPs, the Bellman operator, and the average-reward gain/bias solver."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels

ROW_TOL = 1e-12
DEFAULT_THETA = 0.99
MAX_ITER = 10**6


class MdpError(ValueError):
    """Invalid MDP data."""


class ConvergenceError(RuntimeError):
    """Value iteration hit its iteration cap.

    ``gain_estimates`` holds the last per-state increment estimates, which
    differ across states when the optimal gain is not constant.
    """

    def __init__(self, message, gain_estimates=None):
        super().__init__(message)
        self.gain_estimates = gain_estimates


@dataclass(frozen=True, eq=False)
class Mdp:
    """Known rewards ``reward[s, a]`` in [0, 1] and transitions ``transition[s, a, s']``."""

    reward: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        r = np.array(self.reward, dtype=np.float64)
        p = np.array(self.transition, dtype=np.float64)
        if r.ndim != 2:
            raise MdpError(f"reward must be S x A, got shape {r.shape}")
        S, A = r.shape
        if S < 1 or A < 1:
            raise MdpError("need at least one state and one action")
        if p.shape != (S, A, S):
            raise MdpError(f"transition must have shape {(S, A, S)}, got {p.shape}")
        validate_arrays(r, p)
        r.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "transition", p)

    @property
    def num_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[1]

    def policy_chain(self, policy):
        """(reward vector, transition matrix) of the chain induced by ``policy``."""
        policy = check_policy(self, policy)
        idx = np.arange(self.num_states)
        return self.reward[idx, policy], self.transition[idx, policy]

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return (np.array_equal(self.reward, other.reward)
                and np.array_equal(self.transition, other.transition))

    __hash__ = None


def validate_arrays(reward, transition):
    if not np.all(np.isfinite(reward)) or not np.all(np.isfinite(transition)):
        raise MdpError("non-finite entries")
    bad_r = (reward < 0.0) | (reward > 1.0)
    bad_neg = np.any(transition < 0.0, axis=2)
    bad_sum = np.abs(transition.sum(axis=2) - 1.0) > ROW_TOL
    if not (bad_r.any() or bad_neg.any() or bad_sum.any()):
        return
    s, a = np.argwhere(bad_r | bad_neg | bad_sum)[0]
    if bad_r[s, a]:
        raise MdpError(f"reward at (s={s}, a={a}) is {reward[s, a]!r}, outside [0, 1]")
    if bad_neg[s, a]:
        raise MdpError(f"transition row (s={s}, a={a}) has negative entries")
    raise MdpError(f"transition row (s={s}, a={a}) sums to {transition[s, a].sum()!r}, not 1")


def check_policy(m: Mdp, policy) -> np.ndarray:
    pol = np.asarray(policy)
    if pol.shape != (m.num_states,):
        raise MdpError(f"policy must assign one action to each of {m.num_states} states")
    if not np.issubdtype(pol.dtype, np.integer):
        raise MdpError("policy actions must be integers")
    if np.any(pol < 0) or np.any(pol >= m.num_actions):
        raise MdpError("policy action index out of range")
    return pol.astype(np.int64)


def _check_vector(v, m: Mdp) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (m.num_states,):
        raise MdpError(f"value vector must have length {m.num_states}, got shape {v.shape}")
    return v


def q_values(m: Mdp, v) -> np.ndarray:
    v = _check_vector(v, m)
    return m.reward + m.transition @ v


def bellman_apply(m: Mdp, v, with_argmax=False):
    """(Tv)(s) = max_a r(s, a) + P_{s,a} . v, ties broken toward the lowest action."""
    q = q_values(m, v)
    greedy = np.argmax(q, axis=1)
    tv = q[np.arange(m.num_states), greedy]
    if with_argmax:
        return tv, greedy
    return tv


def value_iteration_n(m: Mdp, n: int) -> np.ndarray:
    """Optimal n-step total reward V^n, starting from V^0 = 0."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    v = np.zeros(m.num_states)
    for _ in range(n):
        v = bellman_apply(m, v)
    return v


def span(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("span of an empty vector")
    return float(v.max() - v.min())


def aperiodicity_transform(m: Mdp, theta: float) -> Mdp:
    """Blend every row with a self-loop of weight 1 - theta and scale rewards by theta."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    S = m.num_states
    eye = np.eye(S)[:, None, :]
    p = (1.0 - theta) * eye + theta * m.transition
    return Mdp(theta * m.reward, p)


@dataclass
class GainBias:
    gain: float
    bias: np.ndarray
    residual: float
    iterations: int = 0

    @property
    def span(self) -> float:
        return span(self.bias)


def optimality_residual(m: Mdp, gain: float, bias) -> float:
    """max_s |(Th)(s) - h(s) - gain|."""
    bias = np.asarray(bias, dtype=np.float64)
    return float(np.max(np.abs(bellman_apply(m, bias) - bias - gain)))


def _zero_radius(m: Mdp) -> np.ndarray:
    return np.zeros((m.num_states, m.num_actions))


def solve_gain_bias(m: Mdp, tol: float = 1e-8, aperiodicity_theta: float = DEFAULT_THETA,
                    max_iter: int = MAX_ITER, v0=None) -> GainBias:
    """Optimal gain and min-normalized bias by relative value iteration.

    The iteration runs on the aperiodicity-transformed operator, which shares
    the bias of ``m`` and has gain scaled by theta.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    theta = aperiodicity_theta
    if not 0.0 < theta < 1.0:
        raise ValueError("aperiodicity_theta must lie in (0, 1)")
    v0 = np.zeros(m.num_states) if v0 is None else np.asarray(v0, dtype=np.float64)
    v, diff, _, _, _, n, ok = kernels.optimistic_vi(
        np.ascontiguousarray(m.reward), np.ascontiguousarray(m.transition),
        _zero_radius(m), theta, tol, np.inf, max_iter, v0)
    if not ok:
        raise ConvergenceError(
            f"relative value iteration did not converge in {n} iterations; "
            "the optimal gain may depend on the start state", diff / theta)
    gain = 0.5 * (diff.max() + diff.min()) / theta
    bias = v - v.min()
    return GainBias(float(gain), bias, optimality_residual(m, gain, bias), int(n))


def evaluate_policy(m: Mdp, policy, tol: float = 1e-10, theta: float = DEFAULT_THETA,
                    max_iter: int = MAX_ITER, v0=None):
    """Per-state gain and a relative value vector for a fixed policy.

    Returns ``(gain_vector, values, iterations)``.  The iteration stops when
    the increments are constant to ``tol`` (unichain case) or have stopped
    changing (several recurrent classes with different gains).
    """
    r_pi, p_pi = m.policy_chain(policy)
    S = m.num_states
    v0 = np.zeros(S) if v0 is None else np.asarray(v0, dtype=np.float64)
    v, diff, _, _, _, n, ok = kernels.optimistic_vi(
        np.ascontiguousarray(r_pi[:, None]), np.ascontiguousarray(p_pi[:, None, :]),
        np.zeros((S, 1)), theta, tol, np.inf, max_iter, v0, 1, tol * 1e-2)
    if not ok:
        raise ConvergenceError(f"policy evaluation did not converge in {n} iterations",
                               diff / theta)
    gains = diff / theta
    if gains.max() - gains.min() <= tol:
        gains = np.full(S, 0.5 * (gains.max() + gains.min()))
    return gains, v - v.min(), int(n)


def policy_gain(m: Mdp, policy, tol: float = 1e-10) -> np.ndarray:
    """Long-run average reward of ``policy`` from each start state."""
    return evaluate_policy(m, policy, tol=tol)[0]


def all_policies(m: Mdp, limit: int = 10**6):
    count = m.num_actions ** m.num_states
    if count > limit:
        raise ValueError(f"{count} deterministic policies exceed the enumeration limit {limit}")
    grids = np.indices((m.num_actions,) * m.num_states).reshape(m.num_states, -1).T
    return [g.astype(np.int64) for g in grids]


def transition_cdf(m: Mdp) -> np.ndarray:
    cdf = np.cumsum(m.transition, axis=2)
    cdf[:, :, -1] = 1.0
    return np.ascontiguousarray(cdf)


def simulate_step(m: Mdp, s: int, a: int, rng: np.random.Generator):
    """Sample ``(next_state, reward)``; the reward is the known constant r(s, a)."""
    if not (0 <= s < m.num_states and 0 <= a < m.num_actions):
        raise MdpError(f"(s={s}, a={a}) out of range")
    u = rng.random()
    row = np.cumsum(m.transition[s, a])
    row[-1] = 1.0
    nxt = int(np.searchsorted(row, u, side="right"))
    return min(nxt, m.num_states - 1), float(m.reward[s, a])


# JSON document format

def mdp_to_dict(m: Mdp) -> dict:
    return {
        "num_states": m.num_states,
        "num_actions": m.num_actions,
        "reward": m.reward.tolist(),
        "transition": m.transition.tolist(),
    }


def emit_mdp(m: Mdp) -> str:
    return json.dumps(mdp_to_dict(m), indent=1) + "\n"


def mdp_from_dict(doc) -> Mdp:
    if not isinstance(doc, dict):
        raise MdpError("MDP document must be a JSON object")
    missing = [k for k in ("num_states", "num_actions", "reward", "transition") if k not in doc]
    if missing:
        raise MdpError(f"MDP document is missing fields: {', '.join(missing)}")
    S, A = doc["num_states"], doc["num_actions"]
    if not (isinstance(S, int) and isinstance(A, int)) or S < 1 or A < 1:
        raise MdpError("num_states and num_actions must be positive integers")
    try:
        r = np.array(doc["reward"], dtype=np.float64)
        p = np.array(doc["transition"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MdpError(f"malformed arrays: {exc}") from None
    if r.shape != (S, A):
        raise MdpError(f"reward has shape {r.shape}, expected {(S, A)}")
    if p.shape != (S, A, S):
        raise MdpError(f"transition has shape {p.shape}, expected {(S, A, S)}")
    return Mdp(r, p)


def parse_mdp(text: str) -> Mdp:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MdpError(f"not valid JSON: {exc}") from None
    return mdp_from_dict(doc)


def load_mdp(path) -> Mdp:
    with open(path) as fh:
        return parse_mdp(fh.read())
