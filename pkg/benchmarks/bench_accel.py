"""Benchmark the numba kernel path against the pure-numpy fallback.

The measured kernel is the masked sigmoid-BCE loss/gradient accumulation,
the inner loop of training and fine-tuning. Run:

    python benchmarks/bench_accel.py [--cells 40000] [--rank 16] [--repeat 200]

The same comparison at the full-training level follows (planted fixture,
spec-default configuration), since end-to-end wall time is what the <10s
fine-tune and <60s acceptance budgets care about.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hyperscope import _accel, synthetic
from hyperscope.hypergraph import IncidenceMatrix, normalized_laplacian
from hyperscope.predictor import TrainConfig, split_supervision, train


def bench_kernel(n: int, m: int, rank: int, cells: int, repeat: int) -> None:
    rng = np.random.default_rng(0)
    X = rng.standard_normal((n, rank))
    Y = rng.standard_normal((m, rank))
    rows = rng.integers(0, n, size=cells).astype(np.int64)
    cols = rng.integers(0, m, size=cells).astype(np.int64)
    targets = rng.random(cells)
    weights = np.ones(cells)

    kernels = [("numpy", _accel.bce_loss_grad_numpy)]
    if _accel.bce_loss_grad_numba is not None:
        kernels.append(("numba", _accel.bce_loss_grad_numba))

    print(f"kernel: {cells} cells, rank {rank}, {n}x{m} factors, {repeat} repeats")
    results = {}
    for name, kernel in kernels:
        dX = np.zeros_like(X)
        dY = np.zeros_like(Y)
        kernel(X, Y, rows, cols, targets, weights, dX, dY)  # warm up / jit compile
        t0 = time.perf_counter()
        for _ in range(repeat):
            dX[:] = 0.0
            dY[:] = 0.0
            kernel(X, Y, rows, cols, targets, weights, dX, dY)
        per_call = (time.perf_counter() - t0) / repeat
        results[name] = per_call
        print(f"  {name:>6}: {per_call * 1e3:8.3f} ms/call")
    if len(results) == 2:
        print(f"  speedup numba vs numpy: {results['numpy'] / results['numba']:.1f}x")


def bench_training(seed: int = 0) -> None:
    fx = synthetic.planted_communities(100, 30, 6, 3, 0.1, seed)
    lap = normalized_laplacian(fx.explicit, 4)
    labels = fx.implicit.matrix(5)
    cfg = TrainConfig(seed=seed)
    mask, _ = split_supervision(labels, cfg.supervision_fraction, seed)

    print(f"\nfull training: planted 100x30x6 fixture, {cfg.epochs} epochs, rank {cfg.rank}")
    print(f"  active backend: {_accel.backend()}")
    t0 = time.perf_counter()
    train(fx.implicit.matrix(4), lap, labels, cfg, mask=mask)
    print(f"  wall time: {time.perf_counter() - t0:.2f}s")
    print("  (set HYPERSCOPE_NO_NUMBA=1 and rerun to time the numpy path)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, default=40000)
    parser.add_argument("--rank", type=int, default=16)
    parser.add_argument("--rows", type=int, default=1000)
    parser.add_argument("--cols", type=int, default=800)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    bench_kernel(args.rows, args.cols, args.rank, args.cells, args.repeat)
    bench_training()


if __name__ == "__main__":
    main()
