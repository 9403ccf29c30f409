"""Time the numba and numpy backends on the batch kernel and on a full training run.

    python benchmarks/bench_backends.py [--repeats 200] [--epochs 10]
"""

import argparse
import time
from dataclasses import replace

import numpy as np

from zskl import _accel, _fast
from zskl.data import class_split, generate_synthetic, prepare
from zskl.kernels import KernelSpec
from zskl.objective import ObjectiveSpec
from zskl.optimizer import TrainConfig, train


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--attr-dim", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    d, dp, B, C = args.dim, args.attr_dim, 10, 6
    W = rng.normal(size=(d, dp)) / np.sqrt(d)
    Xb = rng.normal(size=(B, d))
    A = rng.normal(size=(C, dp))
    pos = rng.integers(0, C, B)
    neg = np.array([[c for c in range(C) if c != p] for p in pos])
    npc = np.full(B, 30.0)
    kargs = (0, 0.6, 2, 0.0, True, True, 1.0, 0.0, 0.0)

    ds = generate_synthetic(10, 30, d, dp, 0.05, 0)
    ds = replace(ds, split=class_split(10, 0.6, 0.2, 0, seen_test_fraction=0.2))
    pds, _, part = prepare(ds)
    ospec = ObjectiveSpec("ort", KernelSpec("gaussian", sigma=0.6), lam=1.0)
    cfg = TrainConfig(epochs=args.epochs)

    print(f"batch kernel: B={B}, d={d}, d_attr={dp}, {C - 1} negatives; training: {len(part.train)} samples, "
          f"{args.epochs} epochs")
    results = {}
    for name in ("numba", "numpy"):
        with _accel.use_backend(name):
            _fast.batch_loss_grad(W, Xb, A, pos, neg, npc, *kargs)  # compile / warm up
            train(pds, part.train, ospec, replace(cfg, epochs=1))
            kern = best_of(lambda: _fast.batch_loss_grad(W, Xb, A, pos, neg, npc, *kargs), args.repeats)
            full = best_of(lambda: train(pds, part.train, ospec, cfg), 3)
            results[name] = (kern, full)
            print(f"{name:>6}: batch kernel {kern * 1e6:9.1f} us   training run {full * 1e3:8.1f} ms")
    print(f"speed-up (numpy / numba): kernel x{results['numpy'][0] / results['numba'][0]:.1f}, "
          f"training x{results['numpy'][1] / results['numba'][1]:.1f}")


if __name__ == "__main__":
    main()
