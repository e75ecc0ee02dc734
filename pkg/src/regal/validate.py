"""Numbered acceptance checks shared by ``regal validate`` and the test suite.

Each check returns a :class:`CheckResult`; a check passes only when its
property holds and it finished inside its time budget (if it has one).
Expensive learning runs are cached on the :class:`Suite` so that the
cross-run checks (episode bound, visit-ratio bound) see every run made.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diameters as dm
from .agents import AgentConfig, episode_count_bound, run_agent
from .envs import (LowerBoundParams, lower_bound_copy, lower_bound_gain_gap, make_two_state,
                   make_lower_bound, make_random_wc)
from .harness import OPTIMISM_TOL, visit_ratio_sum, run_all, ExperimentConfig, summarize
from .mdp import Mdp, aperiodicity_transform, all_policies, policy_gain, solve_gain_bias
from .planner import inner_max, lp_inner_oracle, regularization_slack, regularized_plan

COVERAGE_RUNS = 200
COVERAGE_T = 10**4
COVERAGE_H = 6.0
REGULARIZED_CS = (0.001, 0.01, 0.1)
REGRET_T = 2**18
REGRET_SEEDS = 20
REGRET_ENV_SEED = 0
PLAN_SLACK_TOL = 1e-6


@dataclass
class CheckResult:
    number: int
    title: str
    ok: bool
    detail: str
    elapsed: float
    budget: float | None = None

    @property
    def passed(self) -> bool:
        return self.ok and (self.budget is None or self.elapsed <= self.budget)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        timing = f"{self.elapsed:.2f}s" + (f" / {self.budget:g}s" if self.budget else "")
        over = "" if self.budget is None or self.elapsed <= self.budget else " [over time budget]"
        return f"[{tag}] {self.number:>2}. {self.title}: {self.detail} ({timing}){over}"


def _timed(number, title, budget=None):
    def wrap(fn):
        def run(self, *args, **kwargs):
            t0 = self._check_started = time.perf_counter()
            ok, detail, *extra = fn(self, *args, **kwargs)
            # checks built on cached runs are charged the time spent building them
            elapsed = time.perf_counter() - t0 + (extra[0] if extra else 0.0)
            return CheckResult(number, title, bool(ok), detail, elapsed, budget)
        run.number = number
        run.__doc__ = fn.__doc__
        return run
    return wrap


def random_instance(seed: int, S: int, A: int) -> Mdp:
    """Random communicating MDP with a seed-dependent cycle weight."""
    rng = np.random.default_rng(10_000 + seed)
    return make_random_wc(S, A, seed=seed, connectivity=float(rng.uniform(0.05, 1.0)))


@dataclass
class Suite:
    workers: int | None = None
    runs: list = field(default_factory=list)
    _coverage: list | None = None
    _regret: dict | None = None
    _small: list | None = None
    build_seconds: dict = field(default_factory=dict)  # name -> (start, seconds)
    _check_started: float = 0.0

    # shared runs ------------------------------------------------------------

    def coverage_runs(self):
        """REGAL.C on the two-state example, with confidence sets recorded."""
        if self._coverage is None:
            t0 = time.perf_counter()
            cfg = ExperimentConfig(env={"name": "two_state"},
                                   agent={"kind": "regal_c", "horizon": COVERAGE_T,
                                          "H": COVERAGE_H, "delta": 0.05},
                                   seeds=list(range(COVERAGE_RUNS)))
            self._coverage = run_all(cfg, self.workers, record_sets=True)
            self.runs.extend(self._coverage)
            self.build_seconds["coverage"] = (t0, time.perf_counter() - t0)
        return self._coverage

    def regret_summaries(self):
        if self._regret is None:
            t0 = time.perf_counter()
            env_spec = {"name": "random_wc", "params": {"S": 6, "A": 2, "seed": REGRET_ENV_SEED,
                                                        "connectivity": 0.5}}
            sp = solve_gain_bias(make_random_wc(6, 2, seed=REGRET_ENV_SEED), tol=1e-10).span
            agents = {
                "regal_c": {"kind": "regal_c", "horizon": REGRET_T, "H": sp + 1.0},
                "ucrl2_baseline": {"kind": "ucrl2_baseline", "horizon": REGRET_T},
                "regal_d": {"kind": "regal_d", "horizon": REGRET_T},
            }
            self._regret = {}
            for name, agent in agents.items():
                cfg = ExperimentConfig(env=env_spec, agent=agent, seeds=list(range(REGRET_SEEDS)))
                runs = run_all(cfg, self.workers)
                self.runs.extend(runs)
                self._regret[name] = summarize(cfg, runs)
            self.build_seconds["regret"] = (t0, time.perf_counter() - t0)
        return self._regret

    def small_runs(self):
        """Short runs of every agent on the two-state example (S = A = 2, T = 1000)."""
        if self._small is not None:
            return self._small
        out = []
        for kind in ("regal_c", "regal_d", "ucrl2_baseline"):
            for seed in range(10):
                kw = {"H": COVERAGE_H} if kind == "regal_c" else {}
                out.append(run_agent(make_two_state(), AgentConfig(kind, 1000, seed=seed, **kw)))
        self.runs.extend(out)
        self._small = out
        return out

    def _charge(self, name):
        """Build time of a run set made before the current check started (else already timed)."""
        start, seconds = self.build_seconds.get(name, (math.inf, 0.0))
        return seconds if start < self._check_started else 0.0

    # checks -----------------------------------------------------------------

    @_timed(1, "two-state example exactness", budget=1.0)
    def check_1(self):
        m = make_two_state(0.5, 0.1)
        gb = solve_gain_bias(m, tol=1e-10)
        d_ow, _ = dm.one_way_diameter(m)
        d = dm.diameter(m)
        ok = (abs(gb.gain - 1.0) <= 1e-8 and abs(gb.span - 5.0) <= 1e-6
              and abs(d_ow - 10.0) <= 1e-6 and d == math.inf)
        return ok, f"gain={gb.gain:.12g} span={gb.span:.10g} d_ow={d_ow:.10g} d={d}"

    @_timed(2, "bias differences bounded by gain times hitting time", budget=30.0)
    def check_2(self, count=200):
        worst, failed = math.inf, 0
        for seed in range(count):
            rep = dm.verify_bias_hitting_bound(random_instance(seed, 3, 2), tol=1e-6)
            worst = min(worst, rep.worst_slack)
            failed += not rep.passed
        return failed == 0, f"{count} MDPs x 8 policies, failures={failed}, min slack={worst:.3g}"

    @_timed(3, "inner maximization matches vertex enumeration", budget=10.0)
    def check_3(self, count=1000):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(count):
            S = int(rng.integers(1, 7))
            v = rng.normal(size=S) * rng.choice([1.0, 10.0])
            if rng.random() < 0.3:
                v = np.round(v)  # ties
            c = rng.dirichlet(np.full(S, rng.choice([0.3, 1.0, 3.0])))
            if rng.random() < 0.3:
                c[rng.random(S) < 0.4] = 0.0
                c = c / c.sum() if c.sum() > 0 else np.eye(S)[0]
            rho = float(rng.choice([0.0, rng.uniform(0, 2), 2.0]))
            gap = abs(float(inner_max(v, c, rho) @ v) - float(lp_inner_oracle(v, c, rho) @ v))
            worst = max(worst, gap)
        return worst <= 1e-9, f"{count} instances, max |difference|={worst:.3g}"

    @_timed(4, "optimal gain matches policy enumeration", budget=60.0)
    def check_4(self, count=100):
        rng = np.random.default_rng(4)
        worst = 0.0
        for seed in range(count):
            m = random_instance(1000 + seed, int(rng.integers(1, 5)), int(rng.integers(1, 4)))
            lam = solve_gain_bias(m, tol=1e-10).gain
            best = max(policy_gain(m, pi, tol=1e-11).max() for pi in all_policies(m))
            worst = max(worst, abs(lam - best))
        return worst <= 1e-6, f"{count} MDPs, max |gain - enumeration|={worst:.3g}"

    @_timed(5, "aperiodicity transform scales gain and keeps span")
    def check_5(self, count=100):
        worst_gain = worst_span = 0.0
        for seed in range(count):
            m = random_instance(2000 + seed, 1 + seed % 5, 1 + seed % 3)
            gb = solve_gain_bias(m, tol=1e-11)
            for theta in (0.3, 0.9):
                gt = solve_gain_bias(aperiodicity_transform(m, theta), tol=1e-11)
                worst_gain = max(worst_gain, abs(gt.gain - theta * gb.gain))
                worst_span = max(worst_span, abs(gt.span - gb.span))
        ok = worst_gain <= 1e-8 and worst_span <= 1e-6
        return ok, f"{count} MDPs, max gain error={worst_gain:.3g}, max span error={worst_span:.3g}"

    @_timed(6, "episode count bound on every run")
    def check_6(self):
        self.small_runs()
        bad, margin = 0, math.inf
        for r in self.runs:
            S, A, T = r.num_states, r.num_actions, r.horizon
            bound = math.floor(episode_count_bound(S, A, T))
            bad += r.num_episodes > bound
            margin = min(margin, bound - r.num_episodes)
        return bad == 0, f"{len(self.runs)} runs, violations={bad}, min margin={margin}"

    @_timed(7, "truth inside the confidence set at episode starts", budget=300.0)
    def check_7(self):
        runs = self.coverage_runs()
        total = sum(r.num_episodes for r in runs)
        inside = sum(e.truth_in_set for r in runs for e in r.episodes)
        rate = inside / total
        return (rate >= 0.95, f"{len(runs)} runs, {inside}/{total} episode starts = {rate:.4f}",
                self._charge("coverage"))

    @_timed(8, "constrained planner optimism")
    def check_8(self):
        runs = self.coverage_runs()
        checked = bad = 0
        for r in runs:
            if r.config.H < r.span_star:
                continue
            for e in r.episodes:
                if e.truth_in_set:
                    checked += 1
                    bad += e.gain < r.lambda_star - OPTIMISM_TOL
        return checked > 0 and bad == 0, f"{checked} episodes checked, violations={bad}"

    @_timed(9, "regularized planner optimism")
    def check_9(self):
        runs = self.coverage_runs()
        checked = bad = 0
        worst = math.inf
        reward = make_two_state().reward
        for r in runs:
            lam, sp = r.lambda_star, r.span_star
            for e in r.episodes:
                cset = e.confidence_set
                if cset is None or not e.truth_in_set:
                    continue
                for C in REGULARIZED_CS:
                    res = regularized_plan(cset, reward, C, horizon=r.horizon)
                    slack = regularization_slack(res.grid, C, sp)
                    margin = res.objective - (lam - C * sp - slack)
                    worst = min(worst, margin)
                    checked += 1
                    bad += margin < -PLAN_SLACK_TOL
        return checked > 0 and bad == 0, f"{checked} plans checked, violations={bad}, min margin={worst:.3g}"

    @_timed(10, "sublinear regret growth", budget=900.0)
    def check_10(self):
        sums = self.regret_summaries()
        limits = {"regal_c": 2.6, "ucrl2_baseline": 2.6, "regal_d": 2.8}
        parts, ok = [], True
        for name, s in sums.items():
            ratio = s.mean_at(REGRET_T) / s.mean_at(REGRET_T // 4)
            ok &= ratio <= limits[name]
            parts.append(f"{name} {ratio:.3f} (<= {limits[name]})")
        return ok, ", ".join(parts), self._charge("regret")

    @_timed(11, "visit-ratio sum bound on every run")
    def check_11(self):
        self.small_runs()
        bad, worst = 0, 0.0
        for r in self.runs:
            bound = math.sqrt(8.0 * r.num_states * r.num_actions * r.horizon)
            value = visit_ratio_sum(r)
            bad += value > bound
            worst = max(worst, value / bound)
        return bad == 0, f"{len(self.runs)} runs, violations={bad}, max sum/bound={worst:.3f}"

    @_timed(12, "lower-bound family geometry", budget=5.0)
    def check_12(self):
        p = LowerBoundParams(S=2, A=2, d_ow=10, T=10**4, good_copy=0, a_star=0)
        m = make_lower_bound(p)
        d_ow, _ = dm.one_way_diameter(m)
        d = dm.diameter(m)
        ok = abs(d_ow - 10) <= 1.0 and abs(d - 100) <= 10.0
        q = LowerBoundParams(S=4, A=2, d_ow=10, T=10**4)
        r, tr = lower_bound_copy(q.alpha, q.delta, q.eps, q.A, a_star=0)
        copy = Mdp(r, tr)
        measured = policy_gain(copy, [0, 0])[0] - policy_gain(copy, [0, 1])[0]
        closed = lower_bound_gain_gap(q.alpha, q.delta, q.eps)
        threshold = q.eps / (4 * q.alpha)
        ok = ok and abs(measured - closed) <= 1e-9 and measured > threshold
        return ok, (f"d_ow={d_ow:.6g} d={d:.6g}; gain gap={measured:.6g} "
                    f"(closed form {closed:.6g}) > {threshold:.4g}")

    def checks(self, include_regret: bool = True):
        order = [1, 2, 3, 4, 5, 7, 8, 9, 12]
        if include_regret:
            order.append(10)
        order += [6, 11]
        return [getattr(self, f"check_{n}") for n in order]

    def run(self, include_regret: bool = True, echo=None):
        results = []
        for check in self.checks(include_regret):
            res = check()
            results.append(res)
            if echo:
                echo(res.line())
        return results
