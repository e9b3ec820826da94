"""Labeled embedding sets and their on-disk interchange formats.

Two formats are supported: a human-auditable CSV (header
``id,label,e0,...,e{D-1}``) and a length-prefixed binary format that
round-trips vectors bit-exactly.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EMBEDDING_MAGIC = b"EMB1"

SPLIT_TAGS = ("train", "validation", "test", "other")


class EmbeddingError(ValueError):
    """Malformed embedding file or invalid record data."""


class DuplicateIdError(EmbeddingError):
    """Two records in one set share an id."""


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """One sample: unique id, class label, and a real-valued vector."""

    id: str
    label: str
    vector: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and np.array_equal(self.vector, other.vector)
        )


class EmbeddingSet:
    """Ordered, validated collection of labeled embedding vectors.

    Record order is canonical: all downstream ranking ties are broken by
    it.  When ``sigmoid_range`` is set (the default) every component must
    lie in [0, 1]; clear it for upstream models without a squashing output.
    """

    def __init__(
        self,
        ids: list[str],
        labels: list[str],
        vectors: np.ndarray,
        split_tag: str = "other",
        sigmoid_range: bool = True,
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise EmbeddingError(f"vectors must be a 2-D array, got ndim={vectors.ndim}")
        if vectors.shape[1] < 1:
            raise EmbeddingError("embedding dimension must be >= 1")
        if not (len(ids) == len(labels) == vectors.shape[0]):
            raise EmbeddingError(
                f"parallel lengths differ: {len(ids)} ids, {len(labels)} labels, "
                f"{vectors.shape[0]} vectors"
            )
        if split_tag not in SPLIT_TAGS:
            raise EmbeddingError(f"unknown split tag {split_tag!r}, expected one of {SPLIT_TAGS}")
        seen: set[str] = set()
        for rid in ids:
            if rid in seen:
                raise DuplicateIdError(f"duplicate id {rid!r}")
            seen.add(rid)
        if not np.all(np.isfinite(vectors)):
            raise EmbeddingError("vectors contain non-finite components")
        if sigmoid_range and vectors.size and (vectors.min() < 0.0 or vectors.max() > 1.0):
            bad = int(np.argmax((vectors < 0.0) | (vectors > 1.0), axis=None) // vectors.shape[1])
            raise EmbeddingError(
                f"component outside [0, 1] in record {ids[bad]!r} "
                "(set sigmoid_range=False to allow unbounded embeddings)"
            )
        self.ids = list(ids)
        self.labels = list(labels)
        self.vectors = vectors
        self.split_tag = split_tag
        self.sigmoid_range = sigmoid_range

    @classmethod
    def from_records(
        cls,
        records: list[EmbeddingRecord],
        dim: int | None = None,
        split_tag: str = "other",
        sigmoid_range: bool = True,
    ) -> "EmbeddingSet":
        """Build a set from records; ``dim`` is required only when empty."""
        if not records:
            if dim is None:
                raise EmbeddingError("dim is required for an empty record list")
            return cls([], [], np.zeros((0, dim)), split_tag, sigmoid_range)
        lengths = {len(r.vector) for r in records}
        if len(lengths) != 1:
            raise EmbeddingError(f"records have mixed vector lengths: {sorted(lengths)}")
        vecs = np.asarray([r.vector for r in records], dtype=np.float64)
        return cls([r.id for r in records], [r.label for r in records], vecs,
                   split_tag, sigmoid_range)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def records(self) -> list[EmbeddingRecord]:
        return [self.record(i) for i in range(len(self))]

    def record(self, i: int) -> EmbeddingRecord:
        return EmbeddingRecord(self.ids[i], self.labels[i], self.vectors[i])

    def subset(self, indices, split_tag: str | None = None) -> "EmbeddingSet":
        """New set with the selected records, preserving the given order."""
        indices = list(indices)
        return EmbeddingSet(
            [self.ids[i] for i in indices],
            [self.labels[i] for i in indices],
            self.vectors[indices] if indices else np.zeros((0, self.dim)),
            split_tag if split_tag is not None else self.split_tag,
            self.sigmoid_range,
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.labels == other.labels
            and self.dim == other.dim
            and np.array_equal(self.vectors, other.vectors)
            and self.split_tag == other.split_tag
            and self.sigmoid_range == other.sigmoid_range
        )

    def __repr__(self) -> str:
        return (
            f"EmbeddingSet(n={len(self)}, dim={self.dim}, split={self.split_tag!r}, "
            f"sigmoid_range={self.sigmoid_range})"
        )


def load_embeddings(
    path: str | Path,
    format: str = "csv",
    split_tag: str = "other",
    sigmoid_range: bool = True,
) -> EmbeddingSet:
    """Load and validate an embedding set from ``path``.

    Record order equals file order.  Raises :class:`EmbeddingError` on a
    malformed file and :class:`DuplicateIdError` on a repeated id.
    """
    path = Path(path)
    if format == "csv":
        ids, labels, rows = _read_csv(path)
        vectors = np.asarray(rows, dtype=np.float64) if rows else np.zeros((0, _csv_dim(path)))
    elif format == "binary":
        ids, labels, vectors = _read_binary(path)
    else:
        raise ValueError(f"unknown format {format!r}, expected 'csv' or 'binary'")
    return EmbeddingSet(ids, labels, vectors, split_tag, sigmoid_range)


def save_embeddings(emb_set: EmbeddingSet, path: str | Path, format: str = "csv") -> None:
    """Write ``emb_set`` so that :func:`load_embeddings` reads it back.

    Binary round-trips bit-exactly; CSV uses shortest-round-trip float
    formatting so it round-trips exactly as well.
    """
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "label"] + [f"e{i}" for i in range(emb_set.dim)])
            for i in range(len(emb_set)):
                writer.writerow(
                    [emb_set.ids[i], emb_set.labels[i]]
                    + [repr(float(x)) for x in emb_set.vectors[i]]
                )
    elif format == "binary":
        with open(path, "wb") as fh:
            fh.write(EMBEDDING_MAGIC)
            fh.write(struct.pack("<IQ", emb_set.dim, len(emb_set)))
            for i in range(len(emb_set)):
                fh.write(_length_prefixed(emb_set.ids[i]))
                fh.write(_length_prefixed(emb_set.labels[i]))
                fh.write(emb_set.vectors[i].astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown format {format!r}, expected 'csv' or 'binary'")


def _length_prefixed(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _csv_dim(path: Path) -> int:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    return len(header) - 2


def _read_csv(path: Path) -> tuple[list[str], list[str], list[list[float]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmbeddingError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise EmbeddingError(
                f"{path}: malformed header {header!r}, expected id,label,e0,..."
            )
        dim = len(header) - 2
        ids: list[str] = []
        labels: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue  # tolerate a trailing blank line
            if len(row) != dim + 2:
                raise EmbeddingError(
                    f"{path}:{lineno}: expected {dim + 2} fields, got {len(row)}"
                )
            try:
                rows.append([float(x) for x in row[2:]])
            except ValueError:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric component") from None
            ids.append(row[0])
            labels.append(row[1])
    return ids, labels, rows


def _read_binary(path: Path) -> tuple[list[str], list[str], np.ndarray]:
    data = path.read_bytes()
    if len(data) == 0:
        raise EmbeddingError(f"{path}: empty file")
    if data[:4] != EMBEDDING_MAGIC:
        raise EmbeddingError(f"{path}: bad magic {data[:4]!r}, expected {EMBEDDING_MAGIC!r}")
    if len(data) < 16:
        raise EmbeddingError(f"{path}: truncated header")
    dim, count = struct.unpack_from("<IQ", data, 4)
    offset = 16
    ids: list[str] = []
    labels: list[str] = []
    vectors = np.zeros((count, dim))
    for i in range(count):
        rid, offset = _read_prefixed(data, offset, path)
        label, offset = _read_prefixed(data, offset, path)
        end = offset + 8 * dim
        if end > len(data):
            raise EmbeddingError(f"{path}: truncated at record {i}")
        vectors[i] = np.frombuffer(data, dtype="<f8", count=dim, offset=offset)
        offset = end
        ids.append(rid)
        labels.append(label)
    if offset != len(data):
        raise EmbeddingError(f"{path}: {len(data) - offset} trailing bytes after last record")
    return ids, labels, vectors


def _read_prefixed(data: bytes, offset: int, path: Path) -> tuple[str, int]:
    if offset + 4 > len(data):
        raise EmbeddingError(f"{path}: truncated length prefix")
    (n,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if offset + n > len(data):
        raise EmbeddingError(f"{path}: truncated string field")
    return data[offset:offset + n].decode("utf-8"), offset + n


class DatasetManifest:
    """Per-class sample counts across train/validation/test splits.

    Totals are derived from the per-class counts, so they always agree
    with them.
    """

    MANIFEST_SPLITS = ("train", "validation", "test")

    def __init__(self, counts: dict[str, dict[str, int]]):
        for label, per_split in counts.items():
            for split, n in per_split.items():
                if split not in self.MANIFEST_SPLITS:
                    raise ValueError(f"unknown split {split!r} for class {label!r}")
                if not isinstance(n, int) or n < 0:
                    raise ValueError(f"count for {label!r}/{split} must be a non-negative int")
        self.counts = {
            label: {split: per_split.get(split, 0) for split in self.MANIFEST_SPLITS}
            for label, per_split in counts.items()
        }

    @property
    def labels(self) -> list[str]:
        return list(self.counts)

    def class_total(self, label: str) -> int:
        return sum(self.counts[label].values())

    def split_total(self, split: str) -> int:
        return sum(per_split[split] for per_split in self.counts.values())

    @property
    def total(self) -> int:
        return sum(self.class_total(label) for label in self.counts)

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["label", *self.MANIFEST_SPLITS])
            for label, per_split in self.counts.items():
                writer.writerow([label] + [per_split[s] for s in self.MANIFEST_SPLITS])

    @classmethod
    def load_csv(cls, path: str | Path) -> "DatasetManifest":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty manifest") from None
            if header != ["label", *cls.MANIFEST_SPLITS]:
                raise ValueError(f"{path}: malformed manifest header {header!r}")
            counts: dict[str, dict[str, int]] = {}
            for row in reader:
                if not row:
                    continue
                if len(row) != 4:
                    raise ValueError(f"{path}: malformed manifest row {row!r}")
                if row[0] in counts:
                    raise ValueError(f"{path}: duplicate class {row[0]!r}")
                counts[row[0]] = {
                    split: int(n) for split, n in zip(cls.MANIFEST_SPLITS, row[1:])
                }
        return cls(counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DatasetManifest):
            return NotImplemented
        return self.counts == other.counts

    def __repr__(self) -> str:
        return f"DatasetManifest(classes={len(self.counts)}, total={self.total})"
