#!/usr/bin/env python3
"""Benchmark the compiled trajectory core against the pure-numpy fallback.

Times the pairwise jet right-hand side and full RK4 integrations at
representative sizes and prints a per-workload comparison.

    python benchmarks/bench_backends.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from flockuq import backend
from flockuq.dynamics import random_family
from flockuq.jets import binomial_table
from flockuq.kernels import CommunicationKernel, z_coefficients


def _workloads():
    kernel = CommunicationKernel(psi0=0.5, K0=1.0, sigmaK=0.3, beta0=1.0, sigmaB=0.2)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(0)))
    out = []
    for label, N, m, steps in (
        ("rhs      N=20 m=0", 20, 0, 0),
        ("rhs      N=50 m=0", 50, 0, 0),
        ("rhs      N=10 m=2", 10, 2, 0),
        ("rk4 x500 N=20 m=0", 20, 0, 500),
        ("rk4 x500 N=10 m=2", 10, 2, 500),
    ):
        fam = random_family(N, 2, rng)
        Xj, Vj = fam.jets(0.3, m)
        params = (kernel.psi0, *z_coefficients(kernel, 0.3))
        out.append((label, Xj, Vj, params, binomial_table(m), steps))
    return out


def _time_one(mod, Xj, Vj, params, B, steps, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        if steps:
            mod.jet_rk4(Xj, Vj, *params, B, 1e-3, steps, steps)
        else:
            mod.jet_accel(Xj, Vj, *params, B)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    names = list(backend.available())
    if "compiled" not in names:
        print("compiled core not available; timing the fallback only")
    print(f"{'workload':<22}" + "".join(f"{n:>14}" for n in names) + f"{'speedup':>10}")
    for label, Xj, Vj, params, B, steps in _workloads():
        times = {}
        for name in names:
            times[name] = _time_one(backend.get(name), Xj, Vj, params, B, steps, args.repeats)
        row = f"{label:<22}" + "".join(f"{times[n] * 1e3:>12.3f}ms" for n in names)
        if "compiled" in times and "python" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
