"""Deterministic synthetic embedding sets with tunable class separability."""

from __future__ import annotations

import numpy as np

from hashfind.embeddings import EmbeddingSet


def generate_synthetic(
    num_classes: int,
    per_class: int,
    dim: int,
    separation: float,
    noise: float,
    seed: int,
    split_tag: str = "other",
) -> EmbeddingSet:
    """Generate a labeled embedding set from noisy class centers.

    Each class gets a random center pattern with half its components at
    +separation/2 and half at -separation/2 (patterns are drawn distinct
    across classes while enough patterns exist).  Samples are the center
    plus zero-mean Gaussian noise, squashed through the logistic function
    so every component lands in (0, 1).  A larger separation/noise ratio
    yields more separable classes; the output is a pure function of the
    arguments.

    Labels are ``class0`` .. ``class{num_classes-1}``; ids are
    ``class{c}_{i:04d}`` with per-class sample index ``i``.
    """
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if separation < 0 or noise < 0:
        raise ValueError("separation and noise must be >= 0")

    rng = np.random.default_rng(seed)
    centers = (separation / 2.0) * _sign_patterns(rng, num_classes, dim)

    ids: list[str] = []
    labels: list[str] = []
    blocks: list[np.ndarray] = []
    for c in range(num_classes):
        label = f"class{c}"
        blocks.append(centers[c] + noise * rng.standard_normal((per_class, dim)))
        ids.extend(f"{label}_{i:04d}" for i in range(per_class))
        labels.extend([label] * per_class)

    logits = np.vstack(blocks)
    vectors = 1.0 / (1.0 + np.exp(-logits))
    return EmbeddingSet(ids, labels, vectors, split_tag=split_tag, sigmoid_range=True)


def _sign_patterns(rng: np.random.Generator, num_classes: int, dim: int) -> np.ndarray:
    """Random balanced +-1 patterns, distinct per class when possible."""
    n_high = dim // 2 if dim > 1 else 1
    base = np.concatenate([np.ones(n_high), -np.ones(dim - n_high)])
    patterns: list[np.ndarray] = []
    seen: set[tuple] = set()
    attempts = 0
    # cap rejection so num_classes beyond the distinct-pattern supply still terminates
    max_attempts = 64 * num_classes
    while len(patterns) < num_classes:
        candidate = rng.permutation(base)
        attempts += 1
        key = tuple(candidate)
        if key in seen and attempts < max_attempts:
            continue
        seen.add(key)
        patterns.append(candidate)
    return np.asarray(patterns)
