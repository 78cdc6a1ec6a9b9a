"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py --dim 4 --steps 1024 --repeat 5
"""

import argparse
import time

import numpy as np

from weakkubo import _kernels as k
from weakkubo.presets import random_hermitian


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=4, help="composite Hilbert-space dimension")
    ap.add_argument("--steps", type=int, default=1024, help="number of time steps")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    h0 = random_hermitian(rng, args.dim)
    v = random_hermitian(rng, args.dim)
    strengths = rng.normal(size=args.steps)  # distinct values, so no run merging
    durations = np.full(args.steps, 1.0 / args.steps)
    w, vecs = np.linalg.eigh(h0)
    times = (np.arange(args.steps) + 0.5) / args.steps

    cases = {
        "time_ordered_product": (
            lambda: k.time_ordered_product_numpy(h0, v, strengths, durations),
            lambda: k.time_ordered_product_numba(h0, v, strengths, durations)),
        "heisenberg_trajectory": (
            lambda: k.heisenberg_trajectory_numpy(w, vecs, v, times),
            lambda: k.heisenberg_trajectory_numba(w, vecs, v, times)),
    }
    print(f"dim={args.dim} steps={args.steps} repeat={args.repeat}")
    print(f"{'kernel':24s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for name, (f_np, f_nb) in cases.items():
        diff = np.max(np.abs(f_np() - f_nb()))  # also warms up the jit
        t_np, t_nb = best_of(f_np, args.repeat), best_of(f_nb, args.repeat)
        print(f"{name:24s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
