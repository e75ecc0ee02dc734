import math

import numpy as np
import pytest

from regal.diameters import diameter, min_hitting_time, one_way_diameter
from regal.envs import (LowerBoundParams, build_env, lower_bound_copy, lower_bound_gain_gap,
                        make_two_state, make_lower_bound, make_random_wc)
from regal.mdp import Mdp, MdpError, emit_mdp, policy_gain, solve_gain_bias


def test_two_state_values():
    m = make_two_state(0.5, 0.1)
    gb = solve_gain_bias(m, tol=1e-10)
    assert gb.gain == pytest.approx(1.0, abs=1e-8)
    assert gb.span == pytest.approx(5.0, abs=1e-6)
    assert one_way_diameter(m)[0] == pytest.approx(10.0, abs=1e-6)
    assert diameter(m) == math.inf


def test_two_state_eps_one():
    assert one_way_diameter(make_two_state(0.5, 1.0))[0] == pytest.approx(1.0)


@pytest.mark.parametrize("scale", [0.05, 0.3, 1.0])
def test_two_state_alpha_equals_eps_gives_unit_span(scale):
    assert solve_gain_bias(make_two_state(scale, scale), tol=1e-11).span == pytest.approx(1.0, abs=1e-6)


def test_two_state_rejects_bad_params():
    with pytest.raises(ValueError):
        make_two_state(0.0, 0.1)


def test_lower_bound_params_derived_values():
    p = LowerBoundParams(S=4, A=2, d_ow=10, T=10**4)
    assert p.alpha == pytest.approx(0.1)
    assert p.delta == pytest.approx(0.01)
    assert p.eps == pytest.approx(0.01 * math.sqrt(8 / 1e4))
    for bad in (dict(S=3), dict(S=0), dict(A=0), dict(d_ow=0.5), dict(T=8)):
        kw = dict(S=4, A=2, d_ow=10, T=10**4) | bad
        with pytest.raises(ValueError):
            LowerBoundParams(**kw)


def test_lower_bound_gain_gap_closed_form():
    p = LowerBoundParams(S=4, A=2, d_ow=10, T=10**4)
    r, tr = lower_bound_copy(p.alpha, p.delta, p.eps, p.A, a_star=1)
    copy = Mdp(r, tr)
    gap = policy_gain(copy, [0, 1])[0] - policy_gain(copy, [0, 0])[0]
    closed = lower_bound_gain_gap(p.alpha, p.delta, p.eps)
    assert gap == pytest.approx(closed, abs=1e-9)
    assert closed == pytest.approx(2.3436e-3, rel=1e-3)
    assert closed > p.eps / (4 * p.alpha)


def test_lower_bound_zero_eps_has_no_gap():
    assert lower_bound_gain_gap(0.1, 0.01, 0.0) == 0.0
    r, tr = lower_bound_copy(0.1, 0.01, 0.0, 3, a_star=2)
    assert np.all(tr[1] == tr[1, 0])


def test_single_copy_geometry():
    m = make_lower_bound(LowerBoundParams(S=2, A=2, d_ow=10, T=10**4, good_copy=0, a_star=0))
    assert m.num_actions == 4
    assert one_way_diameter(m)[0] == pytest.approx(10, rel=0.1)
    assert diameter(m) == pytest.approx(100, rel=0.1)


def test_exactly_one_good_copy():
    p = LowerBoundParams(S=8, A=2, d_ow=10, T=10**4, seed=3)
    good, a_star = p.resolved()
    m = make_lower_bound(p)
    for c in range(4):
        row = m.transition[2 * c + 1, a_star]
        is_good = not np.isclose(row[2 * c], p.delta)
        assert is_good == (c == good)


def test_navigation_is_deterministic_reward_free_tree():
    S, A = 14, 2
    p = LowerBoundParams(S=S, A=A, d_ow=5, T=10**4)
    m = make_lower_bound(p)
    nav = m.transition[:, A:, :]
    assert np.all(m.reward[:, A:] == 0.0)
    assert np.all(nav.max(axis=2) == 1.0)
    for c in range(S // 2):
        hi = 2 * c + 1
        assert np.all(nav[hi, :, hi] == 1.0)  # self-loops on the second state
    # every copy's first state reachable from the root within ceil(log_A(S/2)) hops
    hops = {0: 0}
    frontier = [0]
    while frontier:
        nxt = []
        for s in frontier:
            for j in range(A):
                t = int(np.argmax(nav[s, j]))
                if t not in hops:
                    hops[t] = hops[s] + 1
                    nxt.append(t)
        frontier = nxt
    assert set(hops) == {2 * c for c in range(S // 2)}
    assert max(hops.values()) <= math.ceil(math.log(S // 2, A))


def test_lower_bound_is_communicating():
    m = make_lower_bound(LowerBoundParams(S=6, A=2, d_ow=4, T=10**4))
    assert diameter(m) < math.inf


def test_random_wc_properties():
    m = make_random_wc(5, 3, seed=11)
    assert diameter(m) < math.inf
    assert make_random_wc(5, 3, seed=11) == m
    assert make_random_wc(5, 3, seed=12) != m


def test_random_wc_full_connectivity_cycle():
    m = make_random_wc(3, 2, seed=0, connectivity=1.0)
    assert diameter(m) <= 2 + 1e-9


def test_build_env(tmp_path):
    assert build_env({"name": "two_state", "params": {"alpha": 0.5, "eps": 0.1}}) == make_two_state()
    path = tmp_path / "m.json"
    path.write_text(emit_mdp(make_two_state()))
    assert build_env({"file": str(path)}) == make_two_state()
    lb = build_env({"name": "lower_bound", "params": {"S": 4, "A": 2, "d_ow": 10, "T": 10**4}})
    assert lb.num_states == 4
    with pytest.raises(MdpError):
        build_env({"name": "nope"})


def test_min_hitting_time_lower_bound_copy():
    m = make_lower_bound(LowerBoundParams(S=2, A=1, d_ow=10, T=10**4))
    w = min_hitting_time(m, 1)
    assert w[0] == pytest.approx(10.0)
