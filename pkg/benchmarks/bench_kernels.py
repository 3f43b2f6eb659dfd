"""Benchmark the compiled logistic kernel against the numpy fallback.

Times the Newton kernel on replication-sized inputs (N=500, T0=99, r=3),
a full Monte Carlo replication through each backend, and the BLAS-bound
moment kernels (numpy only; a scalar compiled rewrite measured slower,
which is why they are not part of the compiled core).

    python benchmarks/bench_kernels.py [--n-units N] [--n-periods T] [--reps R]
"""

import argparse
import time

import numpy as np

from factoripw import _backend
from factoripw import simulation as sim


def time_call(fn, *args, reps, **kwargs):
    fn(*args, **kwargs)                      # warm up
    start = time.perf_counter()
    for _ in range(reps):
        fn(*args, **kwargs)
    return (time.perf_counter() - start) / reps


def kernel_inputs(n_units, n_periods, rng):
    t0, r = n_periods - 1, 3
    F = rng.normal(size=(t0, r))
    resid = rng.normal(size=(t0, n_units))
    lam = rng.normal(size=(n_units, r))
    X = np.column_stack([np.ones(n_units), lam])
    beta = np.array([-1.75, 0.3, -0.2, 0.4])
    e = 1 / (1 + np.exp(-X @ beta))
    z = (rng.random(n_units) < e).astype(float)
    g_inv = np.linalg.inv(F.T @ F / t0)
    return F, resid, X, e, z, beta, g_inv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-units", type=int, default=500)
    parser.add_argument("--n-periods", type=int, default=100)
    parser.add_argument("--reps", type=int, default=200)
    args = parser.parse_args()

    backends = _backend.available_backends()
    if "cython" not in backends:
        print("compiled core not built; timing the fallback only")

    rng = np.random.default_rng(0)
    F, resid, X, e, z, beta, g_inv = kernel_inputs(args.n_units, args.n_periods, rng)
    scn = sim.benchmark_scenario(1, 2, n_rep=1, seed=0,
                             n_units=args.n_units, n_periods=args.n_periods)

    timings = {}
    for backend in backends:
        impl = _backend._impls[backend]
        timings[("logistic_newton", backend)] = time_call(
            lambda: impl.logistic_newton(X, z), reps=args.reps
        )

    original = _backend.active_backend()
    try:
        for backend in backends:
            _backend.use(backend)
            timings[("full_replication", backend)] = time_call(
                sim.run_replication, scn, 0, reps=max(args.reps // 4, 10)
            )
    finally:
        _backend.use(original)

    names = ["logistic_newton", "full_replication"]
    print(f"\nN={args.n_units}, T={args.n_periods}, r=3  "
          f"(mean of {args.reps} calls)\n")
    header = f"{'kernel':24s} " + "".join(f"{b:>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for name in names:
        row = f"{name:24s} "
        for backend in backends:
            row += f"{timings[(name, backend)] * 1e6:10.1f}us"
        if len(backends) == 2:
            ratio = timings[(name, "python")] / timings[(name, "cython")]
            row += f"{ratio:9.2f}x"
        print(row)

    from factoripw import _kernels_py
    t_phi = time_call(lambda: _kernels_py.phi_stack(F, resid), reps=args.reps)
    t_corr = time_call(
        lambda: _kernels_py.influence_corrections(F, resid, g_inv, X, e, z, beta[1:]),
        reps=args.reps,
    )
    print(f"\nBLAS-bound moment kernels (numpy in every backend):")
    print(f"{'phi_stack':24s} {t_phi * 1e6:10.1f}us")
    print(f"{'influence_corrections':24s} {t_corr * 1e6:10.1f}us")


if __name__ == "__main__":
    main()
