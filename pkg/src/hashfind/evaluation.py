"""Average precision, mAP reports, and the threshold-sweep experiment."""

from __future__ import annotations

import csv
import json
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hashfind.embeddings import EmbeddingSet
from hashfind.encoding import CodeSet, encode_set
from hashfind.index import HashIndex, batch_query, build_index


@dataclass(frozen=True)
class ApResult:
    """Average precision of one query; depth is the ranking length used."""

    query_id: str
    label: str
    ap: float
    gtp: int
    depth: int


@dataclass
class EvalReport:
    """mAP over a query set plus the per-query and per-class breakdown.

    `reference_fingerprint` pins the exact reference database (ranking
    ties follow its insertion order, so scores depend on it).
    `skipped_query_ids` lists queries whose label never occurs among the
    references; they are excluded from the mean.
    """

    map: float
    n_queries_scored: int
    per_query: list[ApResult]
    per_class_map: dict[str, float]
    percentile: float
    depth: int | str
    reference_fingerprint: str
    skipped_query_ids: list[str]

    def to_json_dict(self) -> dict:
        return {
            "map": self.map,
            "n_queries_scored": self.n_queries_scored,
            "percentile": self.percentile,
            "depth": self.depth,
            "reference_fingerprint": self.reference_fingerprint,
            "per_class_map": dict(self.per_class_map),
            "skipped_query_ids": list(self.skipped_query_ids),
            "per_query": [
                {
                    "query_id": r.query_id,
                    "label": r.label,
                    "ap": r.ap,
                    "gtp": r.gtp,
                    "depth": r.depth,
                }
                for r in self.per_query
            ],
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    def write_per_query_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["query_id", "label", "ap", "gtp"])
        for r in self.per_query:
            writer.writerow([r.query_id, r.label, repr(r.ap), r.gtp])

    def save_per_query_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self.write_per_query_csv(fh)


@dataclass
class SweepReport:
    """mAP as a function of threshold percentile, points sorted by q."""

    points: list[tuple[float, float]]
    argmax_percentiles: list[float]
    depth: int | str

    @property
    def best_map(self) -> float:
        return max(m for _, m in self.points)

    def to_json_dict(self) -> dict:
        return {
            "points": [{"percentile": q, "map": m} for q, m in self.points],
            "argmax_percentiles": list(self.argmax_percentiles),
            "best_map": self.best_map,
            "depth": self.depth,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["percentile", "map"])
        for q, m in self.points:
            writer.writerow([repr(float(q)), repr(float(m))])

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self.write_csv(fh)


def average_precision(rel, gtp: int) -> float:
    """AP of one ranked relevance vector.

    AP = (1/gtp) * sum over ranks i of precision(i) * rel[i], where
    precision(i) is the fraction of relevant items among the first i.
    gtp counts the relevant references in the whole set, so a truncated
    ranking that leaves relevants unretrieved scores below 1.
    """
    if gtp < 1:
        raise ValueError(f"gtp must be >= 1, got {gtp}")
    rel = np.asarray(rel, dtype=bool)
    if rel.ndim != 1:
        raise ValueError(f"relevance vector must be 1-D, got ndim={rel.ndim}")
    ranks = np.nonzero(rel)[0] + 1
    if ranks.size == 0:
        return 0.0
    cumulative = np.arange(1, ranks.size + 1)
    return float((cumulative / ranks).sum() / gtp)


def evaluate(
    index: HashIndex,
    queries: EmbeddingSet | CodeSet,
    percentile: float | None = None,
    depth: int | str | None = "full",
    threads: int | None = None,
) -> EvalReport:
    """mAP of a query set against an indexed reference database.

    EmbeddingSet queries are encoded first, at `percentile` if given and
    otherwise at the index's own percentile (queries and references are
    meant to share the encoding).  depth "full" ranks every reference;
    an integer depth truncates the ranking, which lowers AP for queries
    whose relevant references fall outside the cut.
    """
    if isinstance(queries, EmbeddingSet):
        if queries.dim != index.code_length:
            raise ValueError(
                f"query dimension {queries.dim} does not match "
                f"index code length {index.code_length}"
            )
        query_codes = encode_set(
            queries, index.percentile if percentile is None else percentile
        )
    elif isinstance(queries, CodeSet):
        if percentile is not None and float(percentile) != queries.percentile:
            raise ValueError(
                f"queries were already encoded at percentile {queries.percentile}, "
                f"conflicting with percentile={percentile}"
            )
        query_codes = queries
    else:
        raise TypeError(f"queries must be an EmbeddingSet or CodeSet, got {type(queries)!r}")

    n_refs = len(index)
    if depth in ("full", None):
        depth_label: int | str = "full"
        k = n_refs
    else:
        k = int(depth)
        if k < 1:
            raise ValueError(f"depth must be a positive integer or 'full', got {depth}")
        depth_label = k
        k = min(k, n_refs)

    results = batch_query(index, query_codes, k=k, threads=threads)
    gtp_counts = Counter(index.labels)
    per_query: list[ApResult] = []
    skipped: list[str] = []
    for result, label in zip(results, query_codes.labels):
        gtp = gtp_counts.get(label, 0)
        if gtp == 0:
            skipped.append(result.query_id)
            continue
        rel = [hit.reference_label == label for hit in result.hits]
        per_query.append(
            ApResult(result.query_id, label, average_precision(rel, gtp), gtp, len(rel))
        )
    if not per_query:
        raise ValueError("no scorable query: every query label is absent from the references")
    if skipped:
        warnings.warn(
            f"skipped {len(skipped)} of {len(query_codes)} queries with no "
            "same-label reference",
            stacklevel=2,
        )

    by_class: dict[str, list[float]] = {}
    for r in per_query:
        by_class.setdefault(r.label, []).append(r.ap)
    per_class_map = {label: float(np.mean(aps)) for label, aps in sorted(by_class.items())}
    return EvalReport(
        map=float(np.mean([r.ap for r in per_query])),
        n_queries_scored=len(per_query),
        per_query=per_query,
        per_class_map=per_class_map,
        percentile=query_codes.percentile,
        depth=depth_label,
        reference_fingerprint=index.fingerprint.hex(),
        skipped_query_ids=skipped,
    )


def sweep(
    reference: EmbeddingSet,
    queries: EmbeddingSet,
    percentiles,
    depth: int | str | None = "full",
    threads: int | None = None,
) -> SweepReport:
    """Evaluate mAP at each percentile, re-encoding both sets every time.

    Duplicate percentiles are collapsed and the curve comes back sorted
    by q.  The argmax set lists every percentile attaining the maximum.
    """
    values = sorted({float(q) for q in percentiles})
    if not values:
        raise ValueError("percentile list is empty")
    points: list[tuple[float, float]] = []
    for q in values:
        index = build_index(encode_set(reference, q))
        report = evaluate(index, encode_set(queries, q), depth=depth, threads=threads)
        points.append((q, report.map))
    best = max(m for _, m in points)
    argmax = [q for q, m in points if m == best]
    depth_label: int | str = "full" if depth in ("full", None) else int(depth)
    return SweepReport(points=points, argmax_percentiles=argmax, depth=depth_label)
