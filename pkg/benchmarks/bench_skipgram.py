#!/usr/bin/env python3
"""Throughput comparison of the skip-gram kernel backends.

Trains the same toy corpus on every available backend and reports
tokens/second plus the maximum elementwise divergence between the
resulting vectors (both backends consume identical RNG streams, so any
difference is floating-point reduction order).

Usage: python benchmarks/bench_skipgram.py [--tokens 200000] [--dim 32]
"""

import argparse
import random
import time

import numpy as np

import topflop.kernels as kernels
from topflop.embeddings import EmbeddingConfig, train_embeddings


def build_corpus(n_tokens, vocab_size=500, sentence_len=40, seed=1):
    rng = random.Random(seed)
    vocab = [f"token{i:04d}" for i in range(vocab_size)]
    sentences = []
    total = 0
    while total < n_tokens:
        sentence = [rng.choice(vocab) for _ in range(sentence_len)]
        sentences.append(sentence)
        total += sentence_len
    return sentences


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tokens", type=int, default=200_000)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--epochs", type=int, default=1)
    args = parser.parse_args()

    sentences = build_corpus(args.tokens)
    config = EmbeddingConfig(
        dim=args.dim, window=5, negatives=5, epochs=args.epochs,
        min_count=1, buckets=20_000, lr=0.05, seed=7,
    )

    results = {}
    original = kernels.ACTIVE_BACKEND
    try:
        for backend in kernels.available_backends():
            kernels.ACTIVE_BACKEND = backend
            started = time.perf_counter()
            model = train_embeddings(sentences, config)
            elapsed = time.perf_counter() - started
            tokens_per_s = args.tokens * args.epochs / elapsed
            results[backend] = (elapsed, tokens_per_s, model.vectors)
            print(f"{backend:>8}: {elapsed:8.2f} s   {tokens_per_s:12,.0f} tokens/s")
    finally:
        kernels.ACTIVE_BACKEND = original

    if len(results) == 2:
        diff = float(
            np.abs(results["cython"][2] - results["python"][2]).max()
        )
        speedup = results["python"][0] / results["cython"][0]
        print(f"\nspeedup (cython over python): {speedup:.1f}x")
        print(f"max |vector difference|: {diff:.3e}")


if __name__ == "__main__":
    main()
