import math

import numpy as np
import pytest

from regal import kernels
from regal.agents import (AgentConfig, default_c, episode_should_end, hindsight_ck, episode_count_bound,
                          run_agent, run_regal_c, run_regal_d, run_ucrl2_baseline)
from regal.confidence import VisitCounts
from regal.envs import make_two_state, make_random_wc, make_single_state
from regal.mdp import bellman_apply, policy_gain, solve_gain_bias


def test_default_c_value_and_monotonicity():
    c = default_c(2, 2, 10**4, 0.05)
    assert c == pytest.approx(4 * math.sqrt(12 * math.log(8e5)) + math.sqrt(2 * math.log(20)))
    assert c == pytest.approx(53.5333, abs=1e-3)
    assert default_c(3, 2, 10**4, 0.05) > c
    assert default_c(2, 2, 10**5, 0.05) > c
    assert default_c(2, 2, 10**4, 0.01) > c
    near_one = default_c(2, 2, 10**4, 1 - 1e-12)
    assert near_one == pytest.approx(4 * math.sqrt(12 * math.log(4e4)), rel=1e-5)
    with pytest.raises(ValueError):
        default_c(2, 2, 0, 0.05)


def test_episode_should_end():
    zeros = np.zeros((2, 2), dtype=int)
    step = zeros.copy()
    step[0, 1] = 1
    assert episode_should_end(zeros, step)
    assert not episode_should_end(zeros, zeros)
    n = np.full((1, 1), 8)
    assert episode_should_end(n, np.full((1, 1), 8))
    assert not episode_should_end(n, np.full((1, 1), 7))


def test_episode_count_bound_value():
    assert episode_count_bound(2, 2, 1000) == pytest.approx(43.86, abs=0.01)
    assert math.floor(episode_count_bound(2, 2, 1000)) == 43


def test_config_validation():
    with pytest.raises(ValueError):
        AgentConfig("regal_x", 10)
    with pytest.raises(ValueError):
        AgentConfig("regal_c", 10)
    with pytest.raises(ValueError):
        AgentConfig("regal_d", 10, H=1.0)
    with pytest.raises(ValueError):
        AgentConfig("ucrl2_baseline", 10, c=1.0)
    with pytest.raises(ValueError):
        AgentConfig("ucrl2_baseline", 10, delta=1.0)
    with pytest.raises(ValueError):
        AgentConfig("ucrl2_baseline", 0)
    with pytest.raises(ValueError):
        AgentConfig("regal_d", 10, doubling_scope="never")
    with pytest.raises(ValueError):
        run_regal_d(make_two_state(), AgentConfig("regal_c", 10, H=1.0))


def test_single_step_run(two_state):
    r = run_regal_c(two_state, AgentConfig("regal_c", 1, H=5.0))
    assert r.horizon == 1 and r.num_episodes == 1
    ep = r.episodes[0]
    assert ep.length == 1
    assert r.regret_at(1) == pytest.approx(r.lambda_star - two_state.reward[0, ep.policy[0]])
    assert r.regret_at(0) == 0.0


@pytest.mark.parametrize("kind", ["regal_c", "regal_d", "ucrl2_baseline"])
def test_run_bookkeeping(kind, rwc):
    kw = {"H": 2.0} if kind == "regal_c" else {}
    r = run_agent(rwc, AgentConfig(kind, 3000, seed=4, **kw))
    assert sum(e.length for e in r.episodes) == 3000
    for a, b in zip(r.episodes, r.episodes[1:]):
        assert a.t_k + a.length == b.t_k
        # counts at most double (+1) from one episode start to the next
        assert np.all(b.n_start <= a.n_start + np.maximum(a.n_start, 1))
        assert a.ended_by == "doubling"
    for e in r.episodes:
        assert e.visits.sum() == e.length
    assert r.final_counts.t == 3000
    assert r.num_episodes <= episode_count_bound(4, 2, 3000)
    cum = r.cumulative_rewards()
    for t in (0, 1, 17, 3000):
        assert r.regret_at(t) + cum[t] == pytest.approx(r.lambda_star * t, abs=1e-9)


def test_determinism(rwc):
    cfg = AgentConfig("regal_d", 2000, seed=9)
    a, b = run_agent(rwc, cfg), run_agent(rwc, cfg)
    assert a.rewards.tobytes() == b.rewards.tobytes()
    assert [e.to_dict() for e in a.episodes] == [e.to_dict() for e in b.episodes]
    c = run_agent(rwc, AgentConfig("regal_d", 2000, seed=10))
    assert c.rewards.tobytes() != a.rewards.tobytes()


def test_regal_d_subepisode_caps(rwc):
    r = run_regal_d(rwc, AgentConfig("regal_d", 5000, seed=1, c=3.0))
    assert r.episodes[0].subepisodes[0]["cap"] == 2
    for e in r.episodes:
        caps = [sub["cap"] for sub in e.subepisodes]
        assert caps == [2 ** j for j in range(1, len(caps) + 1)]
        for sub in e.subepisodes:
            assert sub["C"] == pytest.approx(3.0 / math.sqrt(sub["cap"]))
            assert sub["length"] <= sub["cap"]
        assert sum(sub["length"] for sub in e.subepisodes) == e.length
        # every sub-episode except the last ran to its cap
        assert all(sub["length"] == sub["cap"] for sub in e.subepisodes[:-1])


def test_regal_d_default_c_used(two_state):
    r = run_regal_d(two_state, AgentConfig("regal_d", 100, seed=0))
    C = r.episodes[0].subepisodes[0]["C"]
    assert C == pytest.approx(default_c(2, 2, 100, 0.05) / math.sqrt(2))


def test_regal_d_subepisode_scope(rwc):
    r = run_agent(rwc, AgentConfig("regal_d", 3000, seed=2, doubling_scope="subepisode"))
    assert sum(e.length for e in r.episodes) == 3000
    for e in r.episodes:
        assert e.visits.sum() == e.length


def test_oracle_counts_follow_optimal_policy():
    m = make_random_wc(4, 3, seed=6)
    counts = VisitCounts(np.rint(np.asarray(m.transition) * 1e14).astype(np.int64))
    opt_gain = solve_gain_bias(m, tol=1e-10).gain
    r = run_agent(m, AgentConfig("ucrl2_baseline", 500, seed=0), counts=counts)
    for e in r.episodes:
        assert policy_gain(m, list(e.policy)).min() == pytest.approx(opt_gain, abs=1e-6)


def test_two_state_agents_find_gain_one_policies(two_state):
    for kind, kw in (("ucrl2_baseline", {}), ("regal_c", {"H": 5.0})):
        r = run_agent(two_state, AgentConfig(kind, 10**4, seed=3, **kw))
        gains = [policy_gain(two_state, list(e.policy))[e.start_state] for e in r.episodes]
        assert all(g == pytest.approx(1.0, abs=1e-6) for g in gains[10:])
        assert r.regret_at(10**4) < 100


def test_single_state_has_zero_regret():
    m = make_single_state(0.4, 2)
    r = run_ucrl2_baseline(m, AgentConfig("ucrl2_baseline", 50))
    assert np.allclose([r.regret_at(t) for t in range(51)], 0.0)


def test_hindsight_ck(rwc):
    r = run_agent(rwc, AgentConfig("regal_c", 2000, H=3.0))
    ck = hindsight_ck(r)
    assert len(ck) == r.num_episodes
    assert all(x > 0 and math.isfinite(x) for x in ck)


def test_record_sets(two_state):
    r = run_agent(two_state, AgentConfig("regal_c", 200, H=5.0, record_sets=True))
    assert all(e.confidence_set is not None for e in r.episodes)
    assert r.episodes[0].confidence_set.built_at == 0


def test_optimal_policy_expected_regret_bounded_by_span(rwc):
    gb = solve_gain_bias(rwc, tol=1e-11)
    _, pol = bellman_apply(rwc, gb.bias, with_argmax=True)
    r_pi, p_pi = rwc.policy_chain(pol)
    for s0 in range(4):
        mu = np.eye(4)[s0]
        total = 0.0
        for t in range(1, 300):
            total += mu @ r_pi
            mu = mu @ p_pi
            assert abs(gb.gain * t - total) <= gb.span + 1e-9


def test_always_stay_regret_is_linear(two_state):
    # from state 0, never moving earns 1 - alpha per step
    rewards = np.zeros(100)
    s, t, _ = kernels.run_policy(np.zeros(2, dtype=np.int64), np.cumsum(two_state.transition, axis=2),
                                 np.ascontiguousarray(two_state.reward), 0, np.random.default_rng(0).random(100),
                                 0, 100, np.full((2, 2), 10**6, dtype=np.int64),
                                 np.zeros((2, 2), dtype=np.int64), np.zeros((2, 2, 2), dtype=np.int64),
                                 rewards)
    lam = solve_gain_bias(two_state, tol=1e-10).gain
    regret = lam * np.arange(101) - np.concatenate(([0.0], np.cumsum(rewards)))
    np.testing.assert_allclose(regret, 0.5 * np.arange(101), atol=1e-7)
