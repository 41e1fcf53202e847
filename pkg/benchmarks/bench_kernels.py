#!/usr/bin/env python3
"""Benchmark the compiled manifold kernels against the NumPy fallback.

Times the batched primitives on the joint gesture manifold
Product(Euclidean(1), (S^1)^13) and a full EM fit routed through each
backend. Run from the repo root:

    python benchmarks/bench_kernels.py [--points 20000] [--repeats 5]
"""

import argparse
import sys
import time

import numpy as np

from posemime.manifold import Euclidean, Product, Sphere
from posemime.manifold import _kernels_py

try:
    from posemime.manifold import _kernels
except ImportError:
    _kernels = None


def best_of(repeats, fn):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_primitives(n_points, repeats):
    m = Product([Euclidean(1), Product([Sphere(1)] * 13)])
    table = m._table
    rng = np.random.default_rng(0)
    base = m.random_point(rng)
    dst = m.random_point(rng)
    pts = m.exp_many(base, rng.standard_normal((n_points, m.tangent_dim)) * 0.4)
    tans = rng.standard_normal((n_points, m.tangent_dim)) * 0.4
    out_t = np.empty((n_points, m.tangent_dim))
    out_e = np.empty((n_points, m.embed_dim))
    out_d = np.empty(n_points)

    ops = {
        "log_many": lambda impl: impl.log_many(*table.args, base, pts, out_t),
        "exp_many": lambda impl: impl.exp_many(*table.args, base, tans, out_e),
        "dist2_many": lambda impl: impl.dist2_many(*table.args, base, pts, out_d),
        "transport_many": lambda impl: impl.transport_many(*table.args, base, dst, tans, out_t),
    }
    rows = []
    for name, op in ops.items():
        t_py = best_of(repeats, lambda: op(_kernels_py))
        t_cy = best_of(repeats, lambda: op(_kernels)) if _kernels else float("nan")
        rows.append((name, n_points, t_py, t_cy))
    return rows


def bench_em(repeats):
    sys.path.insert(0, "tests")
    from synthetic import arm_raise_demos

    from posemime.gmm import TrainingConfig, fit_em
    from posemime.skeleton import EncodingKind, PoseEncoding, encode_sequence

    enc = PoseEncoding(EncodingKind.DIRECTIONS, 2)
    demos = arm_raise_demos(n_demos=20, n_frames=200, noise=0.03)
    seqs = [encode_sequence(f, enc) for f in demos]
    n_points = sum(len(s) for s in seqs)
    cfg = TrainingConfig(components=8, max_iterations=25, ll_tolerance=0.0)

    import posemime.manifold as manifold_pkg

    def run_with(impl):
        # manifold tables resolve their kernels through this name at build
        # time; swap it and use fresh manifold instances so nothing is cached
        original = manifold_pkg.kernels_for
        manifold_pkg.kernels_for = lambda _dim: impl
        try:
            fresh = PoseEncoding(EncodingKind.DIRECTIONS, 2)
            fit_em(seqs, cfg, fresh)
        finally:
            manifold_pkg.kernels_for = original

    t_py = best_of(repeats, lambda: run_with(_kernels_py))
    t_cy = best_of(repeats, lambda: run_with(_kernels)) if _kernels else float("nan")
    return [("fit_em (20x200, K=8)", n_points, t_py, t_cy)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", type=int, default=20_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled kernels unavailable; timing the fallback only\n")

    rows = bench_primitives(args.points, args.repeats) + bench_em(max(1, args.repeats // 2))
    width = max(len(r[0]) for r in rows)
    print(f"{'operation':<{width}}  {'n':>7}  {'numpy':>10}  {'cython':>10}  {'speedup':>7}")
    for name, n, t_py, t_cy in rows:
        speed = t_py / t_cy if t_cy == t_cy and t_cy > 0 else float("nan")
        print(
            f"{name:<{width}}  {n:>7}  {t_py * 1e3:>8.2f}ms  {t_cy * 1e3:>8.2f}ms  {speed:>6.1f}x"
        )


if __name__ == "__main__":
    main()
