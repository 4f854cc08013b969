#!/usr/bin/env python3
"""Throughput benchmark: compiled physics kernel vs pure-Python fallback.

Run:  python benchmarks/bench_kernels.py [--agents 4] [--ticks 20000]

Steps identical worlds through both backends (10 substeps per decision
tick, mixed omni/unicycle team with contacts) and reports wall time,
ticks/second and the speedup factor.  Also verifies the two backends
agree bit for bit on the final state.
"""

import argparse
import time

import numpy as np


def run_backend(step_agents, n_agents, n_ticks, seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1.5, 1.5, (n_agents, 2))
    v = np.zeros((n_agents, 2))
    theta = rng.uniform(-np.pi, np.pi, n_agents)
    omega = np.zeros(n_agents)
    radius = np.full(n_agents, 0.15)
    mass = np.full(n_agents, 1.0)
    unicycle = (np.arange(n_agents) % 2).astype(np.uint8)
    collided = np.zeros(n_agents, dtype=np.uint8)
    commands = rng.uniform(-1, 1, (n_ticks, n_agents, 3))

    start = time.perf_counter()
    for k in range(n_ticks):
        step_agents(
            p, v, theta, omega, radius, mass, unicycle, commands[k],
            collided,
            5.0, 5.0, 100.0, 100.0, -2.5, 2.5, -2.5, 2.5, 0.01, 10,
        )
    elapsed = time.perf_counter() - start
    return elapsed, np.concatenate([p.ravel(), v.ravel(), theta, omega])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agents", type=int, default=4)
    parser.add_argument("--ticks", type=int, default=20_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    from bearing_pursuit._kernels import _simcore_py

    try:
        from bearing_pursuit._kernels import _simcore
    except ImportError:
        raise SystemExit(
            "compiled kernel not built; run `pip install -e . "
            "--no-build-isolation` first"
        )

    print(f"agents={args.agents} ticks={args.ticks} substeps/tick=10")
    t_c, state_c = run_backend(_simcore.step_agents, args.agents,
                               args.ticks, args.seed)
    t_p, state_p = run_backend(_simcore_py.step_agents, args.agents,
                               args.ticks, args.seed)

    identical = np.array_equal(state_c, state_p)
    rows = [
        ("cython", t_c, args.ticks / t_c),
        ("python", t_p, args.ticks / t_p),
    ]
    print(f"{'backend':<8} {'wall s':>9} {'ticks/s':>12}")
    for name, wall, rate in rows:
        print(f"{name:<8} {wall:>9.3f} {rate:>12.0f}")
    print(f"speedup: {t_p / t_c:.1f}x")
    print(f"final states bit-identical: {identical}")
    if not identical:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
