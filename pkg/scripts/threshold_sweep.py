#!/usr/bin/env python3
"""Trace mAP against the threshold percentile on a reference/query split.

Either point --reference/--queries at embedding CSVs or let the script
synthesize a separable dataset.  Writes the curve as CSV and prints it
with the argmax set marked.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hashfind.embeddings import load_embeddings
from hashfind.evaluation import sweep
from hashfind.synthetic import generate_synthetic


@dataclass
class SweepConfig:
    classes: int = 4
    per_class_reference: int = 50
    per_class_query: int = 10
    dim: int = 8
    separation: float = 6.0
    noise: float = 0.2
    seed: int = 42
    step: float = 5.0
    depth: str = "full"


def synthesize_split(cfg: SweepConfig):
    per_class = cfg.per_class_reference + cfg.per_class_query
    full = generate_synthetic(
        cfg.classes, per_class, cfg.dim, cfg.separation, cfg.noise, cfg.seed
    )
    ref_rows, qry_rows = [], []
    for c in range(cfg.classes):
        base = c * per_class
        ref_rows.extend(range(base, base + cfg.per_class_reference))
        qry_rows.extend(range(base + cfg.per_class_reference, base + per_class))
    return full.subset(ref_rows), full.subset(qry_rows, split_tag="test")


def main() -> int:
    cfg = SweepConfig()
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reference", help="reference embedding CSV (default: synthetic)")
    parser.add_argument("--queries", help="query embedding CSV (default: synthetic)")
    parser.add_argument("--classes", type=int, default=cfg.classes)
    parser.add_argument("--per-class-reference", type=int, default=cfg.per_class_reference)
    parser.add_argument("--per-class-query", type=int, default=cfg.per_class_query)
    parser.add_argument("--dim", type=int, default=cfg.dim)
    parser.add_argument("--separation", type=float, default=cfg.separation)
    parser.add_argument("--noise", type=float, default=cfg.noise)
    parser.add_argument("--seed", type=int, default=cfg.seed)
    parser.add_argument("--step", type=float, default=cfg.step,
                        help="percentile grid step (default 5)")
    parser.add_argument("--depth", default=cfg.depth)
    parser.add_argument("--out", default="threshold_sweep.csv")
    args = parser.parse_args()

    if bool(args.reference) != bool(args.queries):
        parser.error("--reference and --queries must be given together")

    if args.reference:
        reference = load_embeddings(args.reference)
        queries = load_embeddings(args.queries)
    else:
        cfg = SweepConfig(
            classes=args.classes,
            per_class_reference=args.per_class_reference,
            per_class_query=args.per_class_query,
            dim=args.dim,
            separation=args.separation,
            noise=args.noise,
            seed=args.seed,
        )
        reference, queries = synthesize_split(cfg)

    grid = [min(100.0, args.step * i) for i in range(int(100.0 / args.step) + 1)]
    if grid[-1] != 100.0:
        grid.append(100.0)
    depth = "full" if args.depth == "full" else int(args.depth)
    curve = sweep(reference, queries, grid, depth=depth)
    curve.save_csv(args.out)

    print(f"references: {len(reference)}  queries: {len(queries)}  depth: {depth}")
    print("percentile    mAP")
    for q, m in curve.points:
        mark = "  <- max" if q in curve.argmax_percentiles else ""
        print(f"{q:10.1f}  {m:.4f}{mark}")
    print(f"curve written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
