#!/usr/bin/env python3
"""Benchmark the compiled trajectory-integration kernel against the numpy
fallback, plus an end-to-end echo-decay comparison run in subprocesses so
each backend is selected at import.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from quadecho import kernels
from quadecho.noise import FluctuatorBath, sample_telegraph_segments


def bench_kernel(n_traj, n_fluct, duration, n_bounds, repeats=3):
    bath = FluctuatorBath("field", n_fluct, 6.5, 0.2, 1000.0)
    rng = np.random.default_rng(0)
    segs = sample_telegraph_segments(bath, n_traj, duration, rng)
    bounds = np.linspace(0.0, duration, n_bounds)
    events = segs.knots.size - segs.offsets.size + 1
    print(
        f"workload: {n_traj} trajectories x {n_fluct} fluctuators, "
        f"{events} switching events, {n_bounds - 1} intervals"
    )
    results = {}
    for backend in kernels.available_backends():
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = kernels.piecewise_integrals(
                segs.knots, segs.values, segs.offsets, bounds, backend=backend
            )
            best = min(best, time.perf_counter() - t0)
        results[backend] = (best, out)
        print(f"  {backend:>6}: {best * 1e3:8.2f} ms")
    if len(results) == 2:
        dev = np.abs(results["cython"][1] - results["numpy"][1]).max()
        print(f"  speedup: {results['numpy'][0] / results['cython'][0]:.2f}x "
              f"(max deviation {dev:.2e})")


END_TO_END = r"""
import sys, time
sys.path.insert(0, {src!r})
import numpy as np
from quadecho import kernels
from quadecho.spin import SpinSystem
from quadecho.noise import StaticDisorder, FluctuatorBath
from quadecho.experiments import hahn_echo_decay

sys_ = SpinSystem(1.5, nu0=1e6, nu_q=0.0, nu_rf=1e6)
dis = StaticDisorder(100.0, 200.0, ensemble_size={ensemble})
bath = FluctuatorBath("field", 4, 6.5, 0.2, 1000.0)
taus = np.geomspace(1e-3, 60e-3, 10)
t0 = time.perf_counter()
trace = hahn_echo_decay(sys_, (1, 2), taus, dis, baths=[bath], realizations=4, seed=5)
dt = time.perf_counter() - t0
print(f"  {{kernels.active_backend():>6}}: {{dt * 1e3:8.1f}} ms   "
      f"amp[-1]={{trace.amplitudes[-1]:.6f}}")
"""


def bench_end_to_end(ensemble):
    src = str(Path(__file__).resolve().parents[1] / "src")
    code = END_TO_END.format(src=src, ensemble=ensemble)
    print(f"end-to-end Hahn decay (ensemble {ensemble} x 4 realizations, 10 tau points):",
          flush=True)
    for backend in kernels.available_backends():
        env = dict(os.environ, QUADECHO_BACKEND=backend)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    scale = 4 if args.quick else 1
    print(f"active backend at import: {kernels.active_backend()}")
    print()
    bench_kernel(16000 // scale, 4, 0.2, 3)
    print()
    bench_kernel(4000 // scale, 30, 0.4, 34)
    print()
    bench_end_to_end(4000 // scale)


if __name__ == "__main__":
    main()
