"""Benchmark the numba-compiled kernels against the pure-numpy fallbacks.

The backend is chosen at import time from the SATDKIT_DISABLE_NUMBA
environment variable, so this script re-executes itself in a subprocess per
backend and prints a per-kernel comparison (best of --repeat runs after a
warm-up call that absorbs JIT compilation).

Usage:
    python benchmarks/bench_kernels.py [--batch 64] [--tokens 128]
                                       [--dim 100] [--maps 100] [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

_CHILD_FLAG = "SATDKIT_BENCH_CHILD"


def run_suite(batch: int, tokens: int, dim: int, maps: int, repeat: int) -> dict:
    from satdkit import kernels

    rng = np.random.default_rng(7)
    results: dict[str, object] = {"backend": kernels.BACKEND}

    def timeit(name: str, fn) -> None:
        fn()  # warm-up; absorbs JIT compilation
        best = min(_timed(fn) for _ in range(repeat))
        results[name] = best

    def _timed(fn) -> float:
        start = time.perf_counter()
        fn()
        return time.perf_counter() - start

    region = 3
    X = rng.standard_normal((batch, tokens, dim))
    lengths = rng.integers(region, tokens + 1, batch).astype(np.int64)
    w_t = np.ascontiguousarray(rng.standard_normal((region * dim, maps)))
    bias = rng.standard_normal(maps)
    pooled, argmax = kernels.conv_pool_forward(X, lengths, w_t, bias)
    timeit("conv_pool_forward",
           lambda: kernels.conv_pool_forward(X, lengths, w_t, bias))

    grad_pooled = rng.standard_normal(pooled.shape)
    timeit("conv_pool_backward",
           lambda: kernels.conv_pool_backward(grad_pooled, pooled, argmax,
                                              X, w_t, region))

    vocab_rows = 5000
    indices = rng.integers(0, vocab_rows, (batch, tokens)).astype(np.int64)
    grad_x = rng.standard_normal((batch, tokens, dim))
    timeit("embedding_grad",
           lambda: kernels.embedding_grad(grad_x, indices, vocab_rows))

    param = rng.standard_normal(vocab_rows * dim)
    grad = rng.standard_normal(vocab_rows * dim)
    m = np.zeros_like(param)
    v = np.zeros_like(param)
    timeit("adam_step",
           lambda: kernels.adam_step(param, grad, m, v, 1e-3, 0.9, 0.999, 1e-8, 1))

    n_words, buckets, units_per_word, pairs, negs = 1000, 2048, 4, 20000, 5
    vin = ((rng.random((n_words + buckets, dim)) - 0.5) / dim).astype(np.float32)
    vout = np.zeros((n_words, dim), dtype=np.float32)
    unit_ids = np.concatenate([
        np.concatenate(([w], rng.integers(n_words, n_words + buckets,
                                          units_per_word - 1)))
        for w in range(n_words)]).astype(np.int64)
    unit_indptr = (np.arange(n_words + 1) * units_per_word).astype(np.int64)
    centers = rng.integers(0, n_words, pairs).astype(np.int64)
    contexts = rng.integers(0, n_words, pairs).astype(np.int64)
    negatives = rng.integers(0, n_words, (pairs, negs)).astype(np.int64)
    timeit("skipgram_epoch",
           lambda: kernels.skipgram_epoch(vin.copy(), vout.copy(), unit_indptr,
                                          unit_ids, centers, contexts, negatives,
                                          0.05, 0.01))
    return results


def run_child(disable_numba: bool, args) -> dict:
    env = dict(os.environ)
    env[_CHILD_FLAG] = "1"
    env["SATDKIT_DISABLE_NUMBA"] = "1" if disable_numba else ""
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__),
         "--batch", str(args.batch), "--tokens", str(args.tokens),
         "--dim", str(args.dim), "--maps", str(args.maps),
         "--repeat", str(args.repeat)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--tokens", type=int, default=128)
    parser.add_argument("--dim", type=int, default=100)
    parser.add_argument("--maps", type=int, default=100)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if os.environ.get(_CHILD_FLAG):
        json.dump(run_suite(args.batch, args.tokens, args.dim, args.maps,
                            args.repeat), sys.stdout)
        return 0

    fast = run_child(disable_numba=False, args=args)
    slow = run_child(disable_numba=True, args=args)
    if fast["backend"] != "numba":
        print("note: numba unavailable; both columns use the numpy fallback")

    kernels = [k for k in fast if k != "backend"]
    width = max(len(k) for k in kernels)
    print(f"batch={args.batch} tokens={args.tokens} dim={args.dim} "
          f"maps={args.maps} (best of {args.repeat})")
    print(f"{'kernel':<{width}}  {fast['backend']:>12}  {slow['backend']:>12}  speedup")
    for kernel in kernels:
        ratio = slow[kernel] / fast[kernel] if fast[kernel] else float("inf")
        print(f"{kernel:<{width}}  {fast[kernel]:>10.6f}s  {slow[kernel]:>10.6f}s  "
              f"{ratio:>6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
