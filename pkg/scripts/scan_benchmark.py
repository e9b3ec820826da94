#!/usr/bin/env python3
"""Measure batch retrieval throughput across database sizes and code lengths.

Reports the best-of-N wall time for a full batch scan and the implied
code-comparison rate, one row per configuration.
"""

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hashfind.encoding import CodeSet
from hashfind.index import batch_query, build_index


@dataclass
class BenchConfig:
    reference_sizes: list = field(default_factory=lambda: [1_000, 2_708, 10_000, 50_000])
    query_count: int = 404
    code_lengths: list = field(default_factory=lambda: [8, 64, 512])
    k: int = 100
    repeats: int = 5
    threads: int = 1
    seed: int = 0


def random_codes(rng, n, length, prefix):
    w = (length + 63) // 64
    words = rng.integers(0, 1 << 64, size=(n, w), dtype=np.uint64)
    tail = length % 64
    if tail:
        words[:, -1] &= np.uint64((1 << tail) - 1)
    ids = [f"{prefix}{i}" for i in range(n)]
    labels = [f"c{i % 4}" for i in range(n)]
    return CodeSet(ids, labels, words, length, 50.0)


def main() -> int:
    cfg = BenchConfig()
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=cfg.reference_sizes)
    parser.add_argument("--queries", type=int, default=cfg.query_count)
    parser.add_argument("--lengths", type=int, nargs="+", default=cfg.code_lengths)
    parser.add_argument("-k", type=int, default=cfg.k)
    parser.add_argument("--repeats", type=int, default=cfg.repeats)
    parser.add_argument("--threads", type=int, default=cfg.threads)
    parser.add_argument("--seed", type=int, default=cfg.seed)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"queries: {args.queries}  k: {args.k}  threads: {args.threads}  "
          f"best of {args.repeats}")
    print(f"{'refs':>8} {'L':>5} {'time_ms':>9} {'Mcmp/s':>9}")
    for length in args.lengths:
        queries = random_codes(rng, args.queries, length, "q")
        for n in args.sizes:
            index = build_index(random_codes(rng, n, length, "r"))
            k = min(args.k, n)
            batch_query(index, queries, k=k, threads=args.threads)  # warmup
            best = min(
                _timed(lambda: batch_query(index, queries, k=k, threads=args.threads))
                for _ in range(args.repeats)
            )
            rate = n * args.queries / best / 1e6
            print(f"{n:>8} {length:>5} {best * 1e3:>9.2f} {rate:>9.1f}")
    return 0


def _timed(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


if __name__ == "__main__":
    sys.exit(main())
