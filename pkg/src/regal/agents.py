"""Episodic learning loops: REGAL.C, REGAL.D and an unregularized UCRL2-style baseline."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .confidence import VisitCounts, build_confidence_set, contains
from .mdp import Mdp, solve_gain_bias, transition_cdf
from .planner import PLAN_TOL, constrained_plan, evi, regularized_plan

KINDS = ("regal_c", "regal_d", "ucrl2_baseline")


class AgentError(RuntimeError):
    pass


@dataclass
class AgentConfig:
    kind: str
    horizon: int
    delta: float = 0.05
    seed: int = 0
    H: float | None = None
    c: float | None = None
    plan_tol: float = PLAN_TOL
    initial_state: int = 0
    # REGAL.D: "episode" checks the doubling rule on episode visits and ends
    # the episode; "subepisode" checks it on sub-episode visits only
    doubling_scope: str = "episode"
    record_sets: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; expected one of {KINDS}")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.kind == "regal_c":
            if self.H is None or self.H < 0:
                raise ValueError("regal_c needs a nonnegative span bound H")
        elif self.H is not None:
            raise ValueError(f"H is only used by regal_c, not {self.kind}")
        if self.kind != "regal_d" and self.c is not None:
            raise ValueError(f"c is only used by regal_d, not {self.kind}")
        if self.doubling_scope not in ("episode", "subepisode"):
            raise ValueError("doubling_scope must be 'episode' or 'subepisode'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("record_sets")
        return d


def default_c(S: int, A: int, T: int, delta: float) -> float:
    """2 S sqrt(12 log(2 A T / delta)) + sqrt(2 log(1 / delta))."""
    if T < 1 or not 0.0 < delta < 1.0:
        raise ValueError("need T >= 1 and delta in (0, 1)")
    return 2.0 * S * math.sqrt(12.0 * math.log(2.0 * A * T / delta)) + math.sqrt(2.0 * math.log(1.0 / delta))


def episode_should_end(n_start, visits) -> bool:
    """True once some pair's in-episode visits reach max{N_k(s, a), 1}."""
    return bool(np.any(np.asarray(visits) >= np.maximum(np.asarray(n_start), 1)))


def episode_count_bound(S: int, A: int, T: int) -> float:
    """S A log2(8 T / (S A)), valid for T >= S A."""
    return S * A * math.log2(8.0 * T / (S * A))


@dataclass
class EpisodeLog:
    k: int
    t_k: int
    start_state: int
    length: int
    n_start: np.ndarray
    visits: np.ndarray
    truth_in_set: bool
    gain: float
    span: float
    objective: float
    feasible: bool
    ended_by: str
    policy: tuple = ()
    subepisodes: list = field(default_factory=list)
    confidence_set: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "t_k": self.t_k, "start_state": self.start_state, "length": self.length,
            "n_start": self.n_start.tolist(), "visits": self.visits.tolist(),
            "truth_in_set": self.truth_in_set, "gain": self.gain, "span": self.span,
            "objective": self.objective, "feasible": self.feasible,
            "ended_by": self.ended_by, "policy": list(self.policy),
            "subepisodes": self.subepisodes,
        }


@dataclass
class RunResult:
    config: AgentConfig
    lambda_star: float
    span_star: float
    rewards: np.ndarray
    episodes: list
    final_counts: VisitCounts
    num_states: int
    num_actions: int

    @property
    def horizon(self) -> int:
        return self.rewards.size

    @property
    def num_episodes(self) -> int:
        return len(self.episodes)

    def cumulative_rewards(self) -> np.ndarray:
        """Entry t is the total reward of the first t steps (entry 0 is 0)."""
        return np.concatenate(([0.0], np.cumsum(self.rewards)))

    def regret_at(self, t: int) -> float:
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t must lie in [0, {self.horizon}]")
        return self.lambda_star * t - float(self.cumulative_rewards()[t])

    def episode_index_at(self, t: int) -> int:
        """Episode (1-based) that was running at step t; 0 for t = 0."""
        starts = [e.t_k for e in self.episodes]
        if t == 0:
            return 0
        return int(np.searchsorted(starts, t - 1, side="right"))

    def regret_curve(self, checkpoints) -> list:
        cum = self.cumulative_rewards()
        rows = []
        for t in checkpoints:
            rows.append((int(t), float(cum[t]), self.lambda_star * t - float(cum[t]),
                         self.episode_index_at(int(t))))
        return rows


def hindsight_ck(run: RunResult) -> list:
    """The per-episode regularization weights that need the episode's visit counts in advance."""
    S, A, T, delta = run.num_states, run.num_actions, run.horizon, run.config.delta
    log_term = 12.0 * S * math.log(2.0 * A * T / delta)
    out = []
    for ep in run.episodes:
        if ep.length == 0:
            out.append(math.nan)
            continue
        conf = np.sum(ep.visits * np.sqrt(log_term / np.maximum(ep.n_start, 1)))
        out.append((2.0 * conf + math.sqrt(2.0 * ep.length * math.log(1.0 / delta))) / ep.length)
    return out


def _plan_for(cfg: AgentConfig, cset, reward, C=None):
    if cfg.kind == "regal_c":
        return constrained_plan(cset, reward, cfg.H, cfg.plan_tol)
    if cfg.kind == "ucrl2_baseline":
        return evi(cset, reward, cfg.plan_tol)
    return regularized_plan(cset, reward, C, cfg.plan_tol, horizon=cfg.horizon)


def run_agent(env: Mdp, cfg: AgentConfig, counts: VisitCounts | None = None) -> RunResult:
    """Run one seeded learning trajectory of ``cfg.horizon`` steps.

    ``counts`` optionally seeds the visit counts (for oracle experiments).
    """
    S, A, T = env.num_states, env.num_actions, cfg.horizon
    truth = solve_gain_bias(env, tol=1e-10)
    rng = np.random.default_rng(cfg.seed)
    uniforms = rng.random(T)
    cdf = transition_cdf(env)
    reward = np.ascontiguousarray(env.reward)
    rewards_out = np.zeros(T)
    counts = VisitCounts.zeros(S, A) if counts is None else counts.copy()
    c_param = cfg.c
    if cfg.kind == "regal_d" and c_param is None:
        c_param = default_c(S, A, T, cfg.delta)
    s = int(cfg.initial_state)
    if not 0 <= s < S:
        raise AgentError("initial state out of range")
    t = 0
    episodes = []
    k = 0
    while t < T:
        k += 1
        t_k, s_k = t, s
        n_start = counts.n_sa.copy()
        threshold = np.ascontiguousarray(np.maximum(n_start, 1))
        cset = build_confidence_set(counts, cfg.delta, t_k)
        in_set = contains(cset, env)
        visits = np.zeros((S, A), dtype=np.int64)
        subs = []
        if cfg.kind != "regal_d":
            plan = _plan_for(cfg, cset, reward)
            s, t, hit = kernels.run_policy(plan.policy, cdf, reward, s, uniforms, t, T,
                                           threshold, visits, counts.n_sas, rewards_out)
            first = plan
        else:
            first = None
            j = 0
            while True:
                j += 1
                cap = 2 ** j
                C = c_param / math.sqrt(cap)
                plan = _plan_for(cfg, cset, reward, C)
                first = first or plan
                start = t
                if cfg.doubling_scope == "episode":
                    s, t, hit = kernels.run_policy(plan.policy, cdf, reward, s, uniforms, t,
                                                   min(T, t + cap), threshold, visits,
                                                   counts.n_sas, rewards_out)
                else:
                    sub_visits = np.zeros((S, A), dtype=np.int64)
                    s, t, _ = kernels.run_policy(plan.policy, cdf, reward, s, uniforms, t,
                                                 min(T, t + cap), threshold, sub_visits,
                                                 counts.n_sas, rewards_out)
                    visits += sub_visits
                    hit = episode_should_end(n_start, visits)
                subs.append({"j": j, "cap": cap, "C": C, "length": t - start,
                             "gain": plan.gain, "span": plan.span,
                             "objective": plan.objective, "feasible": plan.feasible,
                             "policy": [int(a) for a in plan.policy]})
                if hit or t >= T:
                    break
        counts.refresh()
        episodes.append(EpisodeLog(
            k=k, t_k=t_k, start_state=s_k, length=t - t_k, n_start=n_start, visits=visits.copy(),
            truth_in_set=in_set, gain=first.gain, span=first.span,
            objective=first.objective, feasible=first.feasible,
            ended_by="doubling" if hit else "horizon",
            policy=tuple(int(a) for a in first.policy), subepisodes=subs,
            confidence_set=cset if cfg.record_sets else None))
    return RunResult(cfg, truth.gain, truth.span, rewards_out, episodes, counts, S, A)


def _check_kind(cfg: AgentConfig, kind: str):
    if cfg.kind != kind:
        raise ValueError(f"config is for {cfg.kind}, expected {kind}")


def run_regal_c(env: Mdp, cfg: AgentConfig) -> RunResult:
    _check_kind(cfg, "regal_c")
    return run_agent(env, cfg)


def run_regal_d(env: Mdp, cfg: AgentConfig) -> RunResult:
    _check_kind(cfg, "regal_d")
    return run_agent(env, cfg)


def run_ucrl2_baseline(env: Mdp, cfg: AgentConfig) -> RunResult:
    _check_kind(cfg, "ucrl2_baseline")
    return run_agent(env, cfg)
