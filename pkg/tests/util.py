"""Small helpers for building random test data."""

from __future__ import annotations

import numpy as np

from hashfind.encoding import BinaryCode, CodeSet


def random_code_words(rng: np.random.Generator, n: int, length: int) -> np.ndarray:
    """(n, ceil(length/64)) uint64 matrix with the tail bits cleared."""
    w = (length + 63) // 64
    words = rng.integers(0, 1 << 64, size=(n, w), dtype=np.uint64)
    tail = length % 64
    if tail:
        words[:, -1] &= np.uint64((1 << tail) - 1)
    return words


def random_code(rng: np.random.Generator, length: int) -> BinaryCode:
    return BinaryCode(random_code_words(rng, 1, length)[0], length)


def random_codeset(
    rng: np.random.Generator,
    n: int,
    length: int,
    n_labels: int = 3,
    prefix: str = "r",
    percentile: float = 50.0,
) -> CodeSet:
    ids = [f"{prefix}{i}" for i in range(n)]
    labels = [f"c{int(x)}" for x in rng.integers(0, n_labels, size=n)]
    return CodeSet(ids, labels, random_code_words(rng, n, length), length, percentile)
