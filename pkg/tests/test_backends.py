"""The compiled kernels and the numpy fallback must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from regal import _fallback
from regal.confidence import VisitCounts, build_confidence_set
from regal.envs import make_random_wc
from regal.mdp import transition_cdf

_kernels = pytest.importorskip("regal._kernels")


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("cap", [np.inf, 0.3])
def test_optimistic_vi_agrees(seed, cap):
    m = make_random_wc(5, 3, seed=seed)
    rng = np.random.default_rng(seed)
    cs = build_confidence_set(VisitCounts(rng.integers(0, 30, size=(5, 3, 5))), 0.05)
    args = (np.ascontiguousarray(m.reward), cs.center, cs.radius, 0.99, 1e-8, cap, 10**6, np.zeros(5))
    a, b = _kernels.optimistic_vi(*args), _fallback.optimistic_vi(*args)
    for x, y in zip(a[:5], b[:5]):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)
    assert a[5:] == b[5:]


def test_policy_evaluation_mode_agrees():
    m = make_random_wc(4, 1, seed=2)
    args = (np.ascontiguousarray(m.reward), np.ascontiguousarray(m.transition), np.zeros((4, 1)),
            0.99, 1e-10, np.inf, 10**6, np.zeros(4), 1, 1e-12)
    a, b = _kernels.optimistic_vi(*args), _fallback.optimistic_vi(*args)
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)
    assert a[5] == b[5]


def test_run_policy_agrees():
    m = make_random_wc(6, 2, seed=1)
    cdf, reward = transition_cdf(m), np.ascontiguousarray(m.reward)
    u = np.random.default_rng(0).random(5000)
    policy = np.array([0, 1, 1, 0, 1, 0], dtype=np.int64)
    thr = np.full((6, 2), 300, dtype=np.int64)
    outs = []
    for mod in (_kernels, _fallback):
        visits = np.zeros((6, 2), dtype=np.int64)
        n_sas = np.zeros((6, 2, 6), dtype=np.int64)
        rewards = np.zeros(5000)
        res = mod.run_policy(policy, cdf, reward, 2, u, 10, 5000, thr, visits, n_sas, rewards)
        outs.append((res, visits, n_sas, rewards))
    (ra, va, na, wa), (rb, vb, nb, wb) = outs
    assert tuple(ra) == tuple(rb)
    assert ra[2] and np.array_equal(va, vb) and np.array_equal(na, nb)
    assert np.array_equal(wa, wb)


def test_pure_backend_reproduces_compiled_run():
    code = ("import numpy as np, sys;"
            "from regal import kernels, run_agent, AgentConfig, make_random_wc;"
            "r = run_agent(make_random_wc(4, 2, seed=1), AgentConfig('regal_c', 3000, H=2.0, seed=5));"
            "sys.stdout.write(kernels.BACKEND + ' ' + repr(float(r.rewards.sum())) + ' ' + str(r.num_episodes))")
    out = {}
    for pure in ("1", "0"):
        env = dict(os.environ, REGAL_PURE=pure)
        out[pure] = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                                   capture_output=True, text=True).stdout.split()
    assert out["1"][0] == "python" and out["0"][0] == "compiled"
    assert out["1"][1:] == out["0"][1:]
