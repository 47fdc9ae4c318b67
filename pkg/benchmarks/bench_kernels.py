"""Timing comparison of the compiled and plain-NumPy kernel backends.

Runs the dense RK4 steppers, the grid sup scan and one end-to-end
experiment under both backends and prints the medians side by side.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from taylorcert import ExperimentConfig, OdeProblem, make_field, run_experiment
from taylorcert import _kernels
from taylorcert._kernels import (
    FIELD_LOGISTIC,
    FIELD_SINE,
    LAM_NONE,
    NO_PARAMS,
    pack_params,
)


def bench_field_rk4():
    _kernels.rk4_field_dense(FIELD_LOGISTIC, NO_PARAMS, 0.5, 0.0, 1.0,
                             2000, 50, LAM_NONE, NO_PARAMS)


def bench_poly_rk4():
    coeffs = np.array([0.25, 0.5, -1.0, 0.1])
    _kernels.rk4_poly_dense(coeffs, 0.5, 0.5, 0.0, 1.0, 2000, 50,
                            LAM_NONE, NO_PARAMS)


def bench_grid_sup():
    params = pack_params((0.4,))
    _kernels.grid_sup_abs_deriv(FIELD_SINE, params, -2.0, 2.0, 0.0, 1.0,
                                2001, 101, 2)


def bench_experiment():
    problem = OdeProblem(field=make_field("logistic"), y0=0.5, t0=0.0,
                         t_end=0.1, theta=0.4, smoothness_order=3)
    run_experiment(ExperimentConfig(problem=problem, ell=1, rho=0.3))


CASES = [
    ("rk4 field stepper (100k substeps)", bench_field_rk4),
    ("rk4 polynomial stepper (100k substeps)", bench_poly_rk4),
    ("grid sup scan (2001 x 101)", bench_grid_sup),
    ("end-to-end experiment", bench_experiment),
]


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    results = {}
    for backend in ("numba", "numpy"):
        _kernels.set_backend(backend)
        for _, fn in CASES:
            fn()  # warm up: compilation, caches
        results[backend] = [median_time(fn, args.repeats) for _, fn in CASES]

    width = max(len(name) for name, _ in CASES)
    print(f"{'case':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for i, (name, _) in enumerate(CASES):
        fast, plain = results["numba"][i], results["numpy"][i]
        ratio = plain / fast if fast > 0 else float("inf")
        print(f"{name:<{width}}  {fast * 1e3:>8.2f}ms  {plain * 1e3:>8.2f}ms"
              f"  {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
