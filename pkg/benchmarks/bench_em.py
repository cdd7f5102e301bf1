#!/usr/bin/env python3
"""Benchmark the EM kernels: numba path vs the pure-numpy fallback.

Times both the raw E/M step kernels and whole fits (selected through the
DESCRANK_BACKEND environment flag, exactly as a user would hit them), and
cross-checks that the two paths agree numerically.

    python3 benchmarks/bench_em.py
    python3 benchmarks/bench_em.py --items 5000 --annotators 12 --classes 5
"""

import argparse
import os
import time

import numpy as np

from descrank import EmConfig, LabelSpace, fit_em, sample
from descrank.backends import ENV_VAR, HAVE_NUMBA, get_backend


def make_workload(n_items, n_ann, k, seed):
    space = LabelSpace(tuple(f"c{c}" for c in range(k)))
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.1, 0.95, size=n_ann)
    xi = rng.uniform(0.1, 1.0, size=(n_ann, k))
    xi /= xi.sum(axis=1, keepdims=True)
    bundle = sample(n_items, space, theta, xi, missing_rate=0.1, seed=seed)
    return space, bundle, theta, xi


def time_kernel(kern, y, theta, xi, k, repeats):
    r, q, _ = kern.e_step(y, theta, xi, k)  # warm (JIT compile on first call)
    kern.m_step(y, q, k, 0.5, 0.1)
    start = time.perf_counter()
    for _ in range(repeats):
        r, q, _ = kern.e_step(y, theta, xi, k)
    e_time = (time.perf_counter() - start) / repeats
    start = time.perf_counter()
    for _ in range(repeats):
        kern.m_step(y, q, k, 0.5, 0.1)
    m_time = (time.perf_counter() - start) / repeats
    return e_time, m_time, (r, q)


def time_fit(backend, matrix, space, config, repeats):
    previous = os.environ.get(ENV_VAR)
    os.environ[ENV_VAR] = backend
    try:
        fit_em(matrix, space, config)  # warm
        start = time.perf_counter()
        for _ in range(repeats):
            model = fit_em(matrix, space, config)
        return (time.perf_counter() - start) / repeats, model
    finally:
        if previous is None:
            del os.environ[ENV_VAR]
        else:
            os.environ[ENV_VAR] = previous


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--items", type=int, default=2000)
    parser.add_argument("--annotators", type=int, default=10)
    parser.add_argument("--classes", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    space, bundle, theta, xi = make_workload(
        args.items, args.annotators, args.classes, args.seed
    )
    y = bundle.matrix.cells
    k = space.k
    print(
        f"workload: {args.items} items x {args.annotators} annotators x "
        f"{k} classes, 10% missing"
    )

    results = {}
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    if not HAVE_NUMBA:
        print("numba not installed; benchmarking the numpy fallback only")

    for name in backends:
        kern = get_backend(name)
        e_time, m_time, outputs = time_kernel(kern, y, theta, xi, k, args.repeats)
        results[name] = {"e_step": e_time, "m_step": m_time, "outputs": outputs}
        print(f"{name:>6}: e_step {e_time * 1e3:8.3f} ms   m_step {m_time * 1e3:8.3f} ms")

    if len(backends) == 2:
        r_np, q_np = results["numpy"]["outputs"]
        r_nb, q_nb = results["numba"]["outputs"]
        agree = np.allclose(r_np, r_nb, rtol=1e-10) and np.allclose(q_np, q_nb, rtol=1e-10)
        print(f"paths agree on E-step outputs (rtol 1e-10): {agree}")
        speedup = results["numpy"]["e_step"] / results["numba"]["e_step"]
        print(f"e_step speedup numba over numpy: {speedup:.1f}x")

    config = EmConfig(restarts=5, max_iterations=100, seed=args.seed)
    fit_repeats = max(1, args.repeats // 10)
    print(f"\nfull fit ({config.restarts} restarts, tol {config.rel_tolerance:g}):")
    fit_times = {}
    for name in backends:
        fit_time, model = time_fit(name, bundle.matrix, space, config, fit_repeats)
        fit_times[name] = fit_time
        print(
            f"{name:>6}: {fit_time * 1e3:8.1f} ms per fit "
            f"(winning restart {model.restart_index}, {model.n_iterations} iterations)"
        )
    if len(backends) == 2:
        print(f"fit speedup numba over numpy: {fit_times['numpy'] / fit_times['numba']:.1f}x")


if __name__ == "__main__":
    main()
