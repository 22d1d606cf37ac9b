#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the four kernels on workloads shaped like a real session (LOF over a
12k-row pool, repeated small-tree fits, bulk prediction), plus one
end-to-end session per backend.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from odeal.kernels import _pure

try:
    from odeal.kernels import _native
except ImportError:
    _native = None


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def row(label, pure_s, native_s):
    speedup = pure_s / native_s if native_s else float("nan")
    print(f"{label:<38} {pure_s * 1e3:>10.1f} ms {native_s * 1e3:>10.1f} ms "
          f"{speedup:>7.1f}x")


def bench_kernels(n_pool, n_train, repeats):
    rng = np.random.default_rng(0)
    X_pool = rng.normal(size=(n_pool, 6))
    X_train = rng.normal(size=(n_train, 6))
    g = rng.normal(size=n_train)
    h = rng.uniform(0.01, 1.0, size=n_train)
    tree = _pure.tree_build(X_train, g, h, 4, 5, 1.0)

    cases = [
        (f"knn_search pool {n_pool} k=10",
         lambda impl: impl.knn_search(X_pool, X_pool, 10, True)),
        (f"tree_build {n_train} rows depth=4 x50",
         lambda impl: [impl.tree_build(X_train, g, h, 4, 5, 1.0)
                       for _ in range(50)]),
        (f"tree_predict_raw {n_pool} rows x50",
         lambda impl: [impl.tree_predict_raw(*tree, X_pool)
                       for _ in range(50)]),
        (f"iforest_depths {n_pool} rows x100",
         lambda impl: [impl.iforest_depths(*tree, X_pool)
                       for _ in range(100)]),
    ]
    print(f"{'kernel':<38} {'pure':>13} {'native':>13} {'speedup':>8}")
    for label, runner in cases:
        pure_s = timeit(lambda: runner(_pure), repeats)
        native_s = timeit(lambda: runner(_native), repeats) if _native else float("nan")
        row(label, pure_s, native_s)


def bench_session(n_rows, repeats):
    import os
    import subprocess
    import sys

    code = (
        "from odeal.data import generate_synthetic_dataset\n"
        "from odeal.engine import SessionConfig, run_al_session\n"
        "from odeal.models import ClassifierSpec, GBDTSpec\n"
        f"ds = generate_synthetic_dataset(n={n_rows}, error_rate=0.01, seed=3)\n"
        "cfg = SessionConfig(classifier=ClassifierSpec(kind='gbdt',"
        " gbdt=GBDTSpec(n_trees=50, max_depth=4)), n_initial=50, budget=100,"
        " init_method='lof', seed=1, confidence_tau=0.0)\n"
        "run_al_session(ds, cfg)\n"
    )
    print(f"\n{'end-to-end session':<38} {'pure':>13} {'native':>13} {'speedup':>8}")
    results = {}
    for backend in ("pure", "native"):
        if backend == "native" and _native is None:
            results[backend] = float("nan")
            continue
        env = dict(os.environ, ODEAL_KERNELS=backend)
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            subprocess.run([sys.executable, "-c", code], env=env, check=True)
            best = min(best, time.perf_counter() - start)
        results[backend] = best
    row(f"session {n_rows} rows budget 50+50", results["pure"], results["native"])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads, single repeat")
    args = parser.parse_args()
    if _native is None:
        print("note: compiled extension unavailable; native column will be nan")
    if args.quick:
        bench_kernels(n_pool=2000, n_train=150, repeats=1)
        bench_session(n_rows=2000, repeats=1)
    else:
        bench_kernels(n_pool=12000, n_train=300, repeats=3)
        bench_session(n_rows=8000, repeats=2)


if __name__ == "__main__":
    main()
