#!/usr/bin/env python3
"""Time the hot kernels on both backends (pure numpy vs numba jit).

Covers the per-slot allocation path (per-EV power bounds + waterfill),
the advantage scan, and a full simulated episode. The jit path is
warmed up before timing so compilation is not billed to the kernel.

    python3 benchmarks/bench_backends.py --sizes 100,1000,10000,50900
"""

import argparse
import time

import numpy as np

from v2gcoord import backend
from v2gcoord.env import EpisodeSpec, V2gEnv
from v2gcoord.fleet import FleetConfig
from v2gcoord.grid import default_scenario


def median_time(fn, repeats):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def allocation_case(rng, n):
    soc_min = rng.uniform(0.05, 0.25, n)
    soc_max = rng.uniform(0.75, 0.95, n)
    soc = rng.uniform(soc_min, soc_max)
    cap = rng.uniform(20.0, 100.0, n)
    p_ch = rng.uniform(3.0, 22.0, n)
    p_dis = -rng.uniform(3.0, 22.0, n)

    def run():
        floor, ceil, head, depth = backend.ev_power_bounds(
            soc, cap, p_ch, p_dis, soc_min, soc_max, 1.0
        )
        target = 0.6 * float(ceil.sum())
        backend.waterfill(target, floor, ceil, head, depth, 1.0)

    return run


def gae_case(rng, horizon=168):
    rewards = rng.normal(size=horizon)
    values = rng.normal(size=horizon)
    nonterminal = (rng.random(horizon) > 0.1).astype(np.float64)

    def run():
        backend.gae_scan(rewards, values, 0.3, nonterminal, 0.95, 0.95)

    return run


def episode_case(seed):
    spec = EpisodeSpec(scenario=default_scenario(), fleet=FleetConfig(n_evs=50, rng_seed=2))
    env = V2gEnv(spec, seed=seed)
    rng = np.random.default_rng(seed)

    def run():
        env.reset()
        done = False
        while not done:
            _, _, done, _ = env.step(float(rng.random()))

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,1000,10000,50900",
                        help="comma-separated fleet sizes for the allocation path")
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = ["numpy"]
    if backend.HAS_NUMBA:
        backends.append("numba")
    else:
        print("numba not importable; timing the numpy path only")

    cases = []
    rng = np.random.default_rng(0)
    for n in sizes:
        cases.append((f"allocate n={n}", allocation_case(rng, n)))
    cases.append(("gae scan 168 steps", gae_case(rng)))
    cases.append(("episode 50 EVs x 20 slots", episode_case(seed=1)))

    results = {}
    for name in backends:
        backend.set_backend(name)
        for label, fn in cases:
            fn()  # warm up (jit compile on the numba path)
            results[(label, name)] = median_time(fn, args.repeats)

    width = max(len(label) for label, _ in cases)
    header = f"{'case':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, _ in cases:
        row = f"{label:<{width}}  "
        for name in backends:
            row += f"{results[(label, name)] * 1e3:>10.3f}ms"
        if len(backends) == 2:
            ratio = results[(label, "numpy")] / results[(label, "numba")]
            row += f"{ratio:>9.2f}x"
        print(row)
    backend.set_backend("auto")


if __name__ == "__main__":
    main()
