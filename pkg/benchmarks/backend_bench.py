"""Benchmark the compiled episode kernel against the pure-numpy fallback.

The per-episode learning update is quadratic in the number of rebalancing
steps (every step re-evaluates the Bellman-error gradient over the episode
so far), which makes it the hot loop of training.  Usage:

    python benchmarks/backend_bench.py [--episodes 200] [--steps 252]
"""

import argparse
import time

import numpy as np

from exploremv import _episode_py

try:
    from exploremv import _episode_kernel
except ImportError:
    _episode_kernel = None


def episode_inputs(rng, n):
    times = np.linspace(0.0, 1.0, n + 1)
    return dict(
        times=times,
        rho=np.full(n, -3.2),
        sigma=np.full(n, 0.10),
        z_wealth=rng.standard_normal(n),
        z_action=rng.standard_normal(n),
        policy_sd=np.full(n, 1.5),
        x0=1.0, w=1.4, lam=2.0, mean_coef=0.2,
        theta1=0.1, theta2=-0.2, phi1=1.4, phi2=0.5,
        eta_theta=0.0005, eta_phi=0.0005,
    )


def bench(mod, episodes, n, seed=0):
    rng = np.random.default_rng(seed)
    batches = [episode_inputs(rng, n) for _ in range(episodes)]
    start = time.perf_counter()
    for kw in batches:
        mod.run_learning_episode(
            kw["times"], kw["rho"], kw["sigma"], kw["z_wealth"], kw["z_action"],
            kw["policy_sd"], kw["x0"], kw["w"], kw["lam"], kw["mean_coef"],
            kw["theta1"], kw["theta2"], kw["phi1"], kw["phi2"],
            kw["eta_theta"], kw["eta_phi"],
        )
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=200)
    parser.add_argument("--steps", type=int, default=252)
    args = parser.parse_args()

    t_py = bench(_episode_py, args.episodes, args.steps)
    rate_py = args.episodes / t_py
    print(f"pure numpy : {t_py:8.3f}s  ({rate_py:8.1f} episodes/s)")

    if _episode_kernel is None:
        print("compiled   : not built (pip install -e . to compile)")
        return

    t_cy = bench(_episode_kernel, args.episodes, args.steps)
    rate_cy = args.episodes / t_cy
    print(f"compiled   : {t_cy:8.3f}s  ({rate_cy:8.1f} episodes/s)")
    print(f"speedup    : {t_py / t_cy:8.2f}x")


if __name__ == "__main__":
    main()
