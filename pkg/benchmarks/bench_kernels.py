"""Training throughput of the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--sessions 2000] [--epochs 2] [--threads 1]

Reports (center, context) pairs per second for every available backend on a
synthetic popularity-block corpus.  The Python backend gets a smaller corpus
slice so the run stays short; throughput is per pair either way.
"""
from __future__ import annotations

import argparse
import time

from seq2vec import _backend
from seq2vec.corpus import build_vocabulary, split_nep
from seq2vec.sgns import Hyperparameters, train
from seq2vec.synthetic import popularity_block_sessions


def bench(backend: str, split, vocab, hp: Hyperparameters, repeat: int) -> tuple[float, int]:
    best = float("inf")
    pairs = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        _, report = train(split, vocab, hp, backend=backend)
        best = min(best, time.perf_counter() - t0)
        pairs = report.pairs
    return pairs / best, pairs


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sessions", type=int, default=2000)
    p.add_argument("--items", type=int, default=2000)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    seqs, _ = popularity_block_sessions(args.items, args.sessions, 40, seed=0)
    hp = Hyperparameters(n_epochs=args.epochs, dim=args.dim, threads=args.threads, subsample=1e-3)
    rates = {}
    for backend in _backend.available():
        n = len(seqs) if backend == "cython" else max(50, len(seqs) // 20)
        vocab = build_vocabulary(seqs[:n])
        split = split_nep(seqs[:n], vocab)
        rate, pairs = bench(backend, split, vocab, hp, args.repeat if backend == "cython" else 1)
        rates[backend] = rate
        print(f"{backend:>7}: {rate:12,.0f} pairs/s  ({pairs:,} pairs, {n} sessions, d={args.dim})")
    if len(rates) > 1:
        print(f"speed-up: {rates['cython'] / rates['python']:.0f}x")


if __name__ == "__main__":
    main()
