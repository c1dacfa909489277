"""Compare the numba and pure-numpy backends of the two hot kernels.

    python benchmarks/bench_kernels.py [--repeats 3]

Times the batched mean-shift aggregation (M and 2M attribute rows) and one
SGD epoch of the label-embedding learner, checks that both backends agree,
and prints a small table. Without numba installed only the numpy rows appear.
"""

import argparse
import time

import numpy as np

from zslca import _kernels


def best_of(fn, repeats):
    fn()  # warm-up (includes JIT compilation on the first numba call)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def mean_shift_case(rng, n_rows, L=16, n=2000):
    rows = rng.random((n_rows, L))
    weights = rng.uniform(1e-3, 1.0, (n, n_rows))
    d2 = ((rows[:, None] - rows[None]) ** 2).sum(axis=2)
    sigma = float(np.median(d2[np.triu_indices(n_rows, 1)]))
    return rows, weights, sigma


def sgd_case(rng, n=2000, d=160, na=256, K=16):
    X = rng.normal(size=(n, d))
    y = rng.integers(0, K, n)
    phi = rng.random((na, K))
    W0 = rng.uniform(-1 / np.sqrt(d), 1 / np.sqrt(d), (d, na))
    return W0, X, y, phi, rng.permutation(n)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    backends = ["numpy"] + (["numba"] if _kernels.HAS_NUMBA else [])
    results = []

    for n_rows in (128, 256):
        rows, weights, sigma = mean_shift_case(rng, n_rows)
        outs = {}
        for b in backends:
            def run(b=b):
                outs[b] = _kernels.mean_shift_batch(rows, weights, sigma, backend=b)
            results.append((f"mean_shift_batch rows={n_rows}", b, best_of(run, args.repeats)))
        if len(outs) == 2:
            assert np.allclose(outs["numpy"][0], outs["numba"][0], atol=1e-12)

    W0, X, y, phi, order = sgd_case(rng)
    for rank_based in (False, True):
        outs = {}
        for b in backends:
            def run(b=b):
                outs[b] = _kernels.sgd_epoch(W0.copy(), X, y, phi, order, 0.005, 1e-4, rank_based, backend=b)
            results.append((f"sgd_epoch {'rank_based' if rank_based else 'uniform'}", b, best_of(run, args.repeats)))
        if len(outs) == 2:
            assert np.allclose(outs["numpy"], outs["numba"], rtol=1e-10, atol=1e-12)

    base = {name: t for name, b, t in results if b == "numpy"}
    print(f"{'kernel':<32} {'backend':<8} {'seconds':>10} {'speedup':>8}")
    for name, b, t in results:
        print(f"{name:<32} {b:<8} {t:>10.4f} {base[name] / t:>7.1f}x")


if __name__ == "__main__":
    main()
