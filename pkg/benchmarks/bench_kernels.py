"""Time the compiled kernels against their pure-Python twins.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--quick]
"""
import argparse
import time

import numpy as np

from vocalscreen import _pycore

try:
    from vocalscreen import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    rng = np.random.default_rng(0)
    n, p = (150, 60) if quick else (450, 307)
    X = rng.standard_normal((n, p))
    y = (X[:, 0] + rng.standard_normal(n) > 0).astype(np.int8)
    w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
    mtry = int(np.sqrt(p))

    Z = (X - X.mean(0)) / X.std(0)
    t = np.where(y == 1, 1.0, -1.0)
    t -= t.mean()
    G = Z.T @ Z / n
    c = Z.T @ t / n
    lambdas = np.abs(c).max() * np.geomspace(1, 1e-3, 100)

    sig = np.sin(np.arange(8000) * 0.09) + 0.1 * rng.standard_normal(8000)
    m = 8000 - 30
    emb = np.column_stack([sig[i * 10:i * 10 + m] for i in range(4)])
    emb /= np.abs(sig).max()

    def tree(mod):
        return lambda: mod.build_tree(X, y, w, mtry, np.uint64(1))

    def apply(mod):
        tr = mod.build_tree(X, y, w, mtry, np.uint64(1))
        return lambda: mod.apply_tree(*tr[:4], X)

    def lasso(mod):
        return lambda: mod.lasso_path(G, c, lambdas, 1e-7, 10_000)

    def rpde(mod):
        return lambda: mod.close_return_histogram(emb, 0.12, 500)

    return [(f"build_tree {n}x{p}, mtry {mtry}", tree), (f"apply_tree {n} rows", apply),
            (f"lasso_path {p} features, 100 lambdas", lasso),
            ("close_return_histogram 1 s at 8 kHz", rpde)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small problem sizes")
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'kernel':42s} {'cython (s)':>11s} {'python (s)':>11s} {'speed-up':>9s}")
    for name, make in cases(args.quick):
        py = best_of(make(_pycore), args.repeat)
        if _core is None:
            print(f"{name:42s} {'-':>11s} {py:11.4f} {'-':>9s}")
            continue
        cy = best_of(make(_core), args.repeat)
        print(f"{name:42s} {cy:11.4f} {py:11.4f} {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
