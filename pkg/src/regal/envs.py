"""Benchmark MDP families and MDP (de)serialization."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mdp import Mdp, MdpError, emit_mdp, load_mdp, parse_mdp

__all__ = [
    "make_two_state", "LowerBoundParams", "make_lower_bound", "lower_bound_copy",
    "lower_bound_gain_gap", "make_random_wc", "make_single_state", "parse_mdp",
    "emit_mdp", "load_mdp", "build_env",
]


def make_two_state(alpha: float = 0.5, eps: float = 0.1) -> Mdp:
    """Two states, two actions; span of the bias is alpha/eps while the diameter is infinite.

    State 0 earns 1 - alpha and either stays (action 0) or moves to state 1
    with probability eps (action 1).  State 1 is absorbing with reward 1.
    """
    if not (0.0 < alpha <= 1.0 and 0.0 < eps <= 1.0):
        raise ValueError("alpha and eps must lie in (0, 1]")
    p = np.array([[[1.0, 0.0], [1.0 - eps, eps]],
                  [[0.0, 1.0], [0.0, 1.0]]])
    r = np.array([[1.0 - alpha, 1.0 - alpha], [1.0, 1.0]])
    return Mdp(r, p)


def make_single_state(reward: float = 0.7, num_actions: int = 1) -> Mdp:
    return Mdp(np.full((1, num_actions), reward), np.ones((1, num_actions, 1)))


@dataclass(frozen=True)
class LowerBoundParams:
    S: int
    A: int
    d_ow: float
    T: int
    good_copy: int | None = None
    a_star: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.S < 2 or self.S % 2:
            raise ValueError("S must be a positive even integer")
        if self.A < 1:
            raise ValueError("A must be positive")
        if self.d_ow < 1:
            raise ValueError("d_ow must be at least 1")
        if self.T <= self.S * self.A:
            raise ValueError("T must exceed S*A so that eps < delta")
        if self.good_copy is not None and not 0 <= self.good_copy < self.S // 2:
            raise ValueError("good_copy out of range")
        if self.a_star is not None and not 0 <= self.a_star < self.A:
            raise ValueError("a_star out of range")

    @property
    def alpha(self) -> float:
        return 1.0 / self.d_ow

    @property
    def delta(self) -> float:
        return self.alpha ** 2

    @property
    def eps(self) -> float:
        return self.delta * math.sqrt(self.S * self.A / self.T)

    def resolved(self):
        """(good_copy, a_star), drawing unset ones from the seed."""
        rng = np.random.default_rng(self.seed)
        good = self.good_copy if self.good_copy is not None else int(rng.integers(self.S // 2))
        a_star = self.a_star if self.a_star is not None else int(rng.integers(self.A))
        return good, a_star


def lower_bound_copy(alpha: float, delta: float, eps: float, A: int, a_star: int | None):
    """Rows and rewards of one two-state copy; ``a_star=None`` gives the all-bad copy."""
    p = np.empty((2, A, 2))
    r = np.empty((2, A))
    p[0, :] = (1.0 - alpha, alpha)
    r[0, :] = 0.0
    p[1, :] = (delta, 1.0 - delta)
    r[1, :] = 1.0
    if a_star is not None:
        p[1, a_star] = (delta - eps, 1.0 - delta + eps)
    return r, p


def lower_bound_gain_gap(alpha: float, delta: float, eps: float) -> float:
    """Closed-form gain difference between playing a* and never playing it."""
    return alpha / (alpha + delta - eps) - alpha / (alpha + delta)


def _tree_target(copy: int, j: int, n_copies: int, A: int) -> int:
    # child j in a complete A-ary tree; missing children wrap to the root
    child = A * copy + 1 + j
    return child if child < n_copies else 0


def make_lower_bound(params: LowerBoundParams) -> Mdp:
    """S/2 two-state copies linked through an A-ary tree of navigation actions.

    Actions 0..A-1 act inside a copy; actions A..2A-1 move deterministically
    between the "1"-states of the copies with reward 0 and are self-loops on
    "2"-states.  Exactly one copy has the good action.
    """
    S, A = params.S, params.A
    alpha, delta, eps = params.alpha, params.delta, params.eps
    if not (eps < delta < alpha and delta - eps >= 0.0):
        raise ValueError("need eps < delta < alpha")
    good, a_star = params.resolved()
    n = S // 2
    reward = np.zeros((S, 2 * A))
    trans = np.zeros((S, 2 * A, S))
    for c in range(n):
        lo, hi = 2 * c, 2 * c + 1
        r, p = lower_bound_copy(alpha, delta, eps, A, a_star if c == good else None)
        for a in range(A):
            reward[lo, a], reward[hi, a] = r[0, a], r[1, a]
            trans[lo, a, lo], trans[lo, a, hi] = p[0, a]
            trans[hi, a, lo], trans[hi, a, hi] = p[1, a]
        for j in range(A):
            trans[lo, A + j, 2 * _tree_target(c, j, n, A)] = 1.0
            trans[hi, A + j, hi] = 1.0
            reward[hi, A + j] = 0.0
    return Mdp(reward, trans)


def make_random_wc(S: int, A: int, seed: int = 0, connectivity: float = 0.5) -> Mdp:
    """Random communicating MDP: Dirichlet rows blended with a random Hamiltonian cycle."""
    if S < 1 or A < 1:
        raise ValueError("S and A must be positive")
    if not 0.0 < connectivity <= 1.0:
        raise ValueError("connectivity must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    cycle = rng.permutation(S)
    succ = np.empty(S, dtype=int)
    succ[cycle] = np.roll(cycle, -1)
    rows = rng.dirichlet(np.ones(S), size=(S, A))
    hop = np.zeros((S, A, S))
    hop[np.arange(S), :, succ] = 1.0
    trans = (1.0 - connectivity) * rows + connectivity * hop
    trans /= trans.sum(axis=2, keepdims=True)
    reward = rng.uniform(0.0, 1.0, size=(S, A))
    return Mdp(reward, trans)


def build_env(spec: dict) -> Mdp:
    """Environment from a config entry: ``{"file": path}`` or ``{"name": ..., "params": {...}}``."""
    if "file" in spec:
        return load_mdp(spec["file"])
    name = spec.get("name")
    params = dict(spec.get("params", {}))
    if name == "two_state":
        return make_two_state(**params)
    if name == "lower_bound":
        return make_lower_bound(LowerBoundParams(**params))
    if name == "random_wc":
        return make_random_wc(**params)
    if name == "single_state":
        return make_single_state(**params)
    raise MdpError(f"unknown environment {name!r}")
