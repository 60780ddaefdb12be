"""Benchmark the two jump-process backends and confirm bit-identity.

Run:  python3 benchmarks/bench_jump.py [n_particles]
"""

import sys
import time

import numpy as np

from bgkness.model import Params, make_grid
from bgkness.steady_state import fixed_point
import bgkness.particle as pt


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 500_000
    grid = make_grid(32, 64, 8.0 * np.sqrt(5.0))
    tau = 5.0 + 0.5 * np.cos(2.0 * np.pi * grid.x)
    p = Params(alpha=0.05, kappa=1.0)
    res = fixed_point(tau, p, grid)
    profiles = {"tau": tau, "T": res.T}
    base = pt.sample_ness(res, n, seed=2024)

    results = {}
    for be in pt.available_backends():
        t0 = time.perf_counter()
        out = pt.step_ensemble(base, 2.0, "linear", profiles, p, backend=be)
        el = time.perf_counter() - t0
        results[be] = (out, el)
        print(f"{be:>7}: {el:8.3f} s   ({n / el / 1e6:.2f} M particles/s)")

    if len(results) == 2:
        a, b = results["python"][0], results["cython"][0]
        same = np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
        print("bit-identical trajectories:", same)
        if not same:
            raise SystemExit(1)
        print(f"speedup: {results['python'][1] / results['cython'][1]:.2f}x")
    else:
        print("only one backend available; nothing to compare")


if __name__ == "__main__":
    main()
