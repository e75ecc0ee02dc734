"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from regal import _fallback
from regal.confidence import VisitCounts, build_confidence_set
from regal.envs import make_random_wc
from regal.mdp import transition_cdf

try:
    from regal import _kernels
except ImportError:  # extension not built
    _kernels = None


def vi_case(S, A, seed=0):
    m = make_random_wc(S, A, seed=seed)
    rng = np.random.default_rng(seed)
    counts = VisitCounts(rng.integers(0, 50, size=(S, A, S)))
    cs = build_confidence_set(counts, 0.05)
    args = (np.ascontiguousarray(m.reward), cs.center, cs.radius, 0.99, 1e-6, np.inf, 10**6, np.zeros(S))
    return lambda mod: mod.optimistic_vi(*args)


def sim_case(S, A, T, seed=0):
    m = make_random_wc(S, A, seed=seed)
    cdf = transition_cdf(m)
    reward = np.ascontiguousarray(m.reward)
    policy = np.zeros(S, dtype=np.int64)
    u = np.random.default_rng(seed).random(T)
    thr = np.full((S, A), T + 1, dtype=np.int64)

    def go(mod):
        visits = np.zeros((S, A), dtype=np.int64)
        n_sas = np.zeros((S, A, S), dtype=np.int64)
        out = np.zeros(T)
        return mod.run_policy(policy, cdf, reward, 0, u, 0, T, thr, visits, n_sas, out)
    return go


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = [(f"optimistic_vi S={S} A={A}", vi_case(S, A)) for S, A in ((2, 2), (6, 2), (20, 4))]
    cases += [(f"run_policy S=6 T={T}", sim_case(6, 2, T)) for T in (10**4, 10**5)]
    print(f"{'case':<28}{'fallback ms':>14}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in cases:
        slow = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:<28}{slow:>14.3f}{'n/a':>14}{'':>10}")
            continue
        fast = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<28}{slow:>14.3f}{fast:>14.3f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
