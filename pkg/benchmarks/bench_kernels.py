"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--rows N] [--features F] [--repeat R]

Both backends are imported in-process; the numba versions are warmed up once
so JIT compilation is not counted.
"""
import argparse
import time

import numpy as np

from driftboost import _accel
from driftboost.gbdt import TrainParams, build_tree, fit_bins, train
from driftboost.gbdt import _kernels as k


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--features", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.normal(size=(args.rows, args.features))
    y = (x[:, 0] + x[:, 1] * x[:, 2] + rng.normal(size=args.rows) > 0).astype(np.int8)
    mapper = fit_bins(x)
    binned = mapper.transform(x)
    n_bins = np.asarray(mapper.n_bins, dtype=np.int64)
    width = int(n_bins.max())
    grad = rng.normal(size=args.rows)
    hess = rng.uniform(0.05, 0.25, size=args.rows)
    slot = rng.integers(0, 8, size=args.rows).astype(np.int64)
    hist = k.build_histograms_np(binned, slot, grad, hess, 8, width)
    g_tot, h_tot = float(hist[0, 0, :, 0].sum()), float(hist[0, 0, :, 1].sum())
    tree, _ = build_tree(binned, grad, hess, TrainParams(max_depth=6), n_bins)
    tree_args = (binned, tree.feature, tree.threshold, tree.left, tree.right, tree.value)

    cases = {
        "histograms": (
            lambda: k.build_histograms_nb(binned, slot, grad, hess, 8, width),
            lambda: k.build_histograms_np(binned, slot, grad, hess, 8, width)),
        "split scan": (
            lambda: k.find_best_split_nb(hist[0], n_bins, g_tot, h_tot, 1.0, 0.0, 0.0, 1e-3),
            lambda: k.find_best_split_np(hist[0], n_bins, g_tot, h_tot, 1.0, 0.0, 0.0, 1e-3)),
        "predict": (
            lambda: k.predict_binned_nb(*tree_args),
            lambda: k.predict_binned_np(*tree_args)),
    }
    if not _accel.USE_NUMBA:
        print("numba unavailable or disabled; only the numpy backend can be timed")
    print(f"rows={args.rows} features={args.features} bins={width}")
    print(f"{'kernel':<12} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, (fast, slow) in cases.items():
        fast()
        t_nb, t_np = best_of(fast, args.repeat), best_of(slow, args.repeat)
        print(f"{name:<12} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}")

    params = TrainParams(num_iterations_max=20, early_stopping_rounds=0)
    t_train = best_of(lambda: train(x, y, None, params), 1)
    print(f"train 20 trees with backend {k.BACKEND}: {t_train:.2f} s")


if __name__ == "__main__":
    main()
