#!/usr/bin/env python3
"""Benchmark the compiled interval-scan kernel against the NumPy fallback.

Two layers:

* kernel: `studentized_scan` on prefix arrays built from simulated data,
  timed per call for a range of tie-block counts B;
* end-to-end: one full confidence region on a 2-d grid, run in a
  subprocess with and without MOMENTSET_FORCE_FALLBACK=1.

Usage: python benchmarks/bench_scan.py [--sizes 200,1000,3200] [--reps 25]
       [--skip-e2e]
"""
from __future__ import annotations

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from momentset import SFunction, TuningPolicy, backend_name, sigma_n
from momentset._kernels import prescan_pairs, scan_profile
from momentset import _scan_py
from momentset.ksstat import IntervalScanContext
from momentset.mc import median_missing, model_for, simulate

try:
    from momentset import _scan as _scan_ext
except ImportError:
    _scan_ext = None

E2E_SNIPPET = """
import time
import momentset as ms
from momentset.mc import median_missing, model_for, simulate

sample = simulate(median_missing(), {n}, 7)
model = model_for(median_missing())
grid = ms.ThetaGrid.from_pitch(((-0.2, 0.7), (0.2, 0.9)), 0.05)
family = ms.InstrumentFamily(kind="all_data_intervals")
region = ms.confidence_region(sample, model, grid, family, ms.SFunction(),
                              ms.TuningPolicy())  # warm caches
t0 = time.perf_counter()
region = ms.confidence_region(sample, model, grid, family, ms.SFunction(),
                              ms.TuningPolicy())
print(f"{{ms.backend_name()}} n={n} grid={{grid.n_points}} "
      f"members={{region.n_members}} seconds={{time.perf_counter() - t0:.3f}}")
"""


def kernel_inputs(n: int, seed: int = 3):
    sample = simulate(median_missing(), n, seed)
    model = model_for(median_missing())
    ctx = IntervalScanContext(sample, model)
    theta = np.array([0.25, 0.5])
    z = model.moment_matrix(ctx.sorted_sample, theta)
    P, Q, sminP = scan_profile(np.ascontiguousarray(z.T), ctx.cuts)
    return P, Q, sminP, n, sigma_n(TuningPolicy(), n)


def time_call(fn, reps: int) -> float:
    runs = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", default="200,500,1000,3200")
    ap.add_argument("--reps", type=int, default=25)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"active backend: {backend_name()}")
    if _scan_ext is None:
        print("compiled extension not importable; kernel table shows "
              "fallback only")

    header = f"{'B':>6} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}"
    print("\nstudentized_scan kernel, d=2, uncapped")
    print(header)
    for n in sizes:
        P, Q, sminP, n_obs, sn = kernel_inputs(n)
        B = P.shape[1] - 1
        pa, pb = prescan_pairs(B)
        arg = (P, Q, sminP, float(n_obs), float(sn), float("inf"), pa, pb)
        t_py = time_call(lambda: _scan_py.studentized_scan(*arg), args.reps)
        if _scan_ext is not None:
            t_c = time_call(lambda: _scan_ext.studentized_scan(*arg), args.reps)
            print(f"{B:>6} {1e3 * t_py:>12.3f} {1e3 * t_c:>14.3f} "
                  f"{t_py / t_c:>8.1f}x")
            got_py = _scan_py.studentized_scan(*arg)
            got_c = _scan_ext.studentized_scan(*arg)
            assert abs(got_py[0] - got_c[0]) < 1e-12, (got_py, got_c)
        else:
            print(f"{B:>6} {1e3 * t_py:>12.3f} {'-':>14} {'-':>8}")

    if not args.skip_e2e:
        print("\nend-to-end confidence region (subprocess per backend)")
        for n in (500,):
            for force in ("0", "1"):
                env = dict(os.environ)
                if force == "1":
                    env["MOMENTSET_FORCE_FALLBACK"] = "1"
                else:
                    env.pop("MOMENTSET_FORCE_FALLBACK", None)
                out = subprocess.run(
                    [sys.executable, "-c", E2E_SNIPPET.format(n=n)],
                    capture_output=True, text=True, env=env)
                if out.returncode:
                    print(out.stderr.strip())
                    return 1
                print("  " + out.stdout.strip())
    return 0


if __name__ == "__main__":
    sys.exit(main())
