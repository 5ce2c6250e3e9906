"""Benchmark: compiled vs pure-numpy compact iteration kernel.

Times the damped fixed-point solve (continuation to the real axis plus both
linear responses) on a mixture-profile problem at the sizes the sweep
actually uses.  Run:

    python benchmarks/bench_kernel.py
"""

from __future__ import annotations

import time

import numpy as np

from rfvp import Dimensions, ModelParams, build_mixture_profile, normalize_row_stochastic
from rfvp import synthetic_class_vectors
from rfvp.detequiv import COMPILED_KERNEL, EtaSchedule
from rfvp.detequiv.linearization import build_linearization_profile
from rfvp.detequiv.solver import continuation_solve


def make_problem(n=300, p=784, K=10, m=300, theta_lin=3.0, nu=6.0**0.5):
    prof = normalize_row_stochastic(
        build_mixture_profile(synthetic_class_vectors(K, p, seed=5), [n // K] * K)
    )
    dims = Dimensions(n, m, p, max(K, n // 3))
    lp = build_linearization_profile(prof, np.full(n, theta_lin), np.full(n, nu), dims)
    return lp


def time_solve(lp, lam, use_compiled):
    t0 = time.perf_counter()
    sol = continuation_solve(lp, lam, EtaSchedule(), use_compiled=use_compiled)
    dt = time.perf_counter() - t0
    return dt, sol.diagnostics["iterations"]


def main():
    print(f"compiled kernel available: {COMPILED_KERNEL}")
    lp = make_problem()
    for lam in (0.05, 0.004, 0.0005):
        t_py, it_py = time_solve(lp, lam, use_compiled=False)
        line = f"lam={lam:<8} numpy : {t_py:8.3f}s  ({it_py} iterations)"
        if COMPILED_KERNEL:
            t_c, it_c = time_solve(lp, lam, use_compiled=True)
            line += f"   compiled: {t_c:8.3f}s  ({it_c} iterations, {t_py / t_c:.1f}x)"
        print(line)


if __name__ == "__main__":
    main()
