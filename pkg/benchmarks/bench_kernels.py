"""Compare the numba and numpy flavours of the numeric kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--segments 20000]

Prints best-of-``repeat`` wall time per call for each kernel and the speed-up,
then an end-to-end point-matching run under each backend (in a subprocess,
since the backend is fixed at import time by ``TAMM_DISABLE_NUMBA``).
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tamm import kernels

E2E = """
import time
from tamm import kernels
from tamm.pipeline import match_points
from tamm.synth import synth_world
w = synth_world(seed=7, grid_n=20, spacing_m=100.0, sampling_s=10.0, n_trajectories=300, min_fixes=3)
w.network.index
t = time.perf_counter()
n = sum(len(match_points(w.network, tr)) for tr in w.trajectories)
print(kernels.BACKEND, n, time.perf_counter() - t)
"""


def polylines(rng, n, max_vertices=4):
    counts = rng.integers(2, max_vertices + 1, n)
    span = 100.0 * np.sqrt(n)
    ax, ay, bx, by, offsets = [], [], [], [], [0]
    for c in counts:
        pts = rng.uniform(0.0, span, 2) + np.cumsum(rng.normal(0.0, 50.0, (c, 2)), axis=0)
        ax.extend(pts[:-1, 0])
        ay.extend(pts[:-1, 1])
        bx.extend(pts[1:, 0])
        by.extend(pts[1:, 1])
        offsets.append(offsets[-1] + c - 1)
    arr = lambda v: np.asarray(v, dtype=np.float64)  # noqa: E731
    return arr(ax), arr(ay), arr(bx), arr(by), np.asarray(offsets, dtype=np.int64), span


def best(fn, repeat):
    fn()  # warm-up (numba compiles on first call)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--segments", type=int, default=20_000)
    p.add_argument("--no-e2e", action="store_true", help="skip the end-to-end matching comparison")
    args = p.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1

    rng = np.random.default_rng(0)
    ax, ay, bx, by, offsets, span = polylines(rng, args.segments)
    qx, qy = rng.uniform(0.0, span, (2, 50))
    n = 200_000
    length, tt = rng.uniform(10.0, 500.0, n), rng.uniform(1.0, 60.0, n)
    alpha, ls = rng.uniform(0.0, 180.0, n), rng.uniform(1.0, 30.0, n)
    dists, angs = rng.uniform(0.0, 200.0, 8), rng.uniform(0.0, 180.0, 8)

    cases = [
        (f"segment_min_distances ({args.segments} polylines)", "segment_min_distances", (qx[0], qy[0], ax, ay, bx, by, offsets)),
        (f"nearest_scan (50 queries, k=8, {args.segments} polylines)", "nearest_scan", (qx, qy, ax, ay, bx, by, offsets, 8)),
        (f"timecost_batch ({n} edges)", "timecost_batch", (length, tt, alpha, ls)),
        ("gravity_weights (8 candidates)", "gravity_weights", (dists, angs)),
    ]
    print(f"{'kernel':<58}{'numpy':>12}{'numba':>12}{'speed-up':>10}")
    for label, name, a in cases:
        t_np = best(lambda: getattr(kernels, name + "_np")(*a), args.repeat)
        t_nb = best(lambda: getattr(kernels, name + "_nb")(*a), args.repeat)
        print(f"{label:<58}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")

    if not args.no_e2e:
        print("\nend-to-end point matching (backend, fixes, seconds):")
        for flag in ("0", "1"):
            env = dict(os.environ, TAMM_DISABLE_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
            print("  " + out.stdout.strip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
