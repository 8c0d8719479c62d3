#!/usr/bin/env python3
"""Benchmark the hot kernels: numba @njit lane vs pure-numpy lane.

Run from the repository root:

    python benchmarks/bench_kernels.py [--frames 5000] [--repeats 5]

The numpy lane is what you get with SLIPNET_NO_NUMBA=1 (or without numba
installed); this script times both lanes directly and checks they agree.
"""

import argparse
import math
import time

import numpy as np

from slipnet import _accel
from slipnet.core import _median_filter_jit, _median_filter_numpy
from slipnet.simgen import (
    DriveProfile,
    PillarPhysics,
    _stick_slip_jit,
    _stick_slip_numpy,
    anchor_displacements,
)


def timeit(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=5000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy lane is available")
        return

    rng = np.random.default_rng(0)
    rows = []

    # median filter over a realistic 27-channel force stream
    x = rng.normal(size=(args.frames, 27))
    _median_filter_jit(x[:100], 21)  # compile outside the timer
    t_jit = timeit(lambda: _median_filter_jit(x, 21), args.repeats)
    t_np = timeit(lambda: _median_filter_numpy(x, 21), args.repeats)
    assert np.array_equal(_median_filter_jit(x, 21), _median_filter_numpy(x, 21))
    rows.append(("median_filter 21", t_jit, t_np))

    # stick-slip stepper over the same horizon
    phys = PillarPhysics.from_compression(1.2, rng=rng)
    t = np.arange(args.frames) * 1e-3
    anchor = anchor_displacements(
        t, "translation+rotation", 0.4,
        DriveProfile(v_peak=8.0, accel=50.0),
        DriveProfile(v_peak=math.radians(25.0), accel=math.radians(120.0)),
    )
    kern_args = (anchor, phys.stiffness, phys.normal_force, phys.mu_static,
                 phys.mu_kinetic, np.ones(9, bool), 1e-3, 1e-6)
    _stick_slip_jit(*kern_args)  # compile
    t_jit = timeit(lambda: _stick_slip_jit(*kern_args), args.repeats)
    t_np = timeit(lambda: _stick_slip_numpy(*kern_args), args.repeats)
    for a, b in zip(_stick_slip_jit(*kern_args), _stick_slip_numpy(*kern_args)):
        assert np.array_equal(a, b)
    rows.append(("stick_slip stepper", t_jit, t_np))

    print(f"{args.frames} frames, best of {args.repeats}")
    print(f"{'kernel':<20} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for name, tj, tn in rows:
        print(f"{name:<20} {tj * 1e3:>8.2f}ms {tn * 1e3:>8.2f}ms {tn / tj:>7.1f}x")


if __name__ == "__main__":
    main()
