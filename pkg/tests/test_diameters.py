import math

import numpy as np
import pytest

from regal.diameters import (DiameterReport, analyze, bias_argmax, d_opt, d_worst, diameter,
                             hitting_matrix, hitting_times, min_hitting_time, one_way_diameter,
                             verify_bias_hitting_bound)
from regal.envs import make_two_state, make_random_wc
from regal.mdp import Mdp


def _chain(p, r=None):
    p = np.asarray(p, dtype=float)[:, None, :]
    r = np.zeros((p.shape[0], 1)) if r is None else np.asarray(r, dtype=float)[:, None]
    return Mdp(r, p)


def test_hitting_times_geometric():
    m = _chain([[0.75, 0.25], [0.0, 1.0]])
    np.testing.assert_allclose(hitting_times(m, [0, 0], 1), [4.0, 0.0])
    assert hitting_times(m, [0, 0], 0)[1] == math.inf


def test_hitting_times_match_monte_carlo():
    m = make_random_wc(4, 1, seed=9)
    exact = hitting_times(m, np.zeros(4, dtype=int), 2)
    rng = np.random.default_rng(0)
    p = m.transition[:, 0]
    samples = []
    for _ in range(4000):
        s, n = 0, 0
        while s != 2:
            s = rng.choice(4, p=p[s])
            n += 1
        samples.append(n)
    assert np.mean(samples) == pytest.approx(exact[0], rel=0.05)


def test_min_hitting_time_picks_best_action(two_state):
    w = min_hitting_time(two_state, 1)
    np.testing.assert_allclose(w, [10.0, 0.0], atol=1e-9)
    assert min_hitting_time(two_state, 0)[1] == math.inf


def test_min_hitting_time_is_min_over_policies(rwc):
    best = np.min([hitting_times(rwc, pi, 1) for pi in np.ndindex(*(2,) * 4)], axis=0)
    np.testing.assert_allclose(min_hitting_time(rwc, 1), best, rtol=1e-8)


def test_diameter_single_state_is_zero():
    m = Mdp(np.array([[0.3]]), np.ones((1, 1, 1)))
    assert diameter(m) == 0.0


def test_diameter_ordering(rwc):
    d = diameter(rwc)
    d_ow, _ = one_way_diameter(rwc)
    assert d_ow <= d + 1e-9
    assert d <= d_opt(rwc) + 1e-9 <= d_worst(rwc) + 2e-9


def test_two_state_report(two_state):
    rep = analyze(two_state)
    assert rep.span == pytest.approx(5.0, abs=1e-6)
    assert rep.d_ow == pytest.approx(10.0, abs=1e-6)
    assert rep.d == math.inf and rep.s_bar == 1
    assert rep.to_dict()["d"] == "inf"
    assert "d_ow     10" in rep.format_text()


def test_bias_argmax_tie_goes_low():
    assert bias_argmax([1.0, 1.0 - 1e-9, 0.5]) == 0
    assert bias_argmax([0.0, 2.0, 2.0]) == 1


def test_hitting_matrix_shape(rwc):
    tm = hitting_matrix(rwc, [0, 1, 0, 1])
    assert tm.shape == (4, 4)
    assert np.all(np.diag(tm) == 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_bias_hitting_bound_exhaustive(seed):
    rep = verify_bias_hitting_bound(make_random_wc(3, 2, seed=seed, connectivity=0.2))
    assert rep.mode == "exhaustive" and rep.policies_checked == 8
    assert rep.passed, rep.worst_case


def test_bias_hitting_bound_sampled_mode():
    m = make_random_wc(7, 8, seed=1)
    rep = verify_bias_hitting_bound(m, samples=20)
    assert rep.mode == "sampled" and rep.policies_checked == 20
    assert rep.passed


def test_bias_hitting_bound_on_two_state(two_state):
    assert verify_bias_hitting_bound(two_state).passed
