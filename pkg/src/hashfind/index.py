"""Exact Hamming-distance retrieval over an immutable code database.

The index is a plain linear scan: XOR the packed words, popcount, stable
sort.  At the scales this engine targets (thousands of codes, L up to
4096) that is both exact and fast enough to beat fancier structures.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hashfind.encoding import MAX_CODE_LENGTH, BinaryCode, CodeSet

INDEX_MAGIC = b"HIDX"
INDEX_VERSION = 1

DEFAULT_K = 100

# word budget per distance block, keeps batch scans around 32 MB
_BLOCK_WORD_BUDGET = 1 << 22


class IndexFormatError(ValueError):
    """Malformed, corrupted, or version-incompatible index file."""


@dataclass(frozen=True)
class Hit:
    reference_id: str
    reference_label: str
    distance: int


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked hits for one query, nearest first.

    Equal distances keep reference insertion order, so the ranking is
    fully deterministic for a given index.
    """

    query_id: str
    hits: list[Hit]


def hamming(a: BinaryCode, b: BinaryCode) -> int:
    """Number of differing bit positions between two equal-length codes."""
    if a.length != b.length:
        raise ValueError(f"code lengths differ: {a.length} != {b.length}")
    return int(np.bitwise_count(a.words ^ b.words).sum())


class HashIndex:
    """Immutable reference database with a content fingerprint.

    The fingerprint is a SHA-256 over the serialized entries plus the
    (L, percentile, count) header, recomputed and checked on load.
    """

    def __init__(self, codeset: CodeSet):
        if len(codeset) == 0:
            raise ValueError("cannot build an index over an empty code set")
        self.codeset = codeset
        self.fingerprint = _fingerprint(codeset)

    @property
    def ids(self) -> list[str]:
        return self.codeset.ids

    @property
    def labels(self) -> list[str]:
        return self.codeset.labels

    @property
    def code_length(self) -> int:
        return self.codeset.code_length

    @property
    def percentile(self) -> float:
        return self.codeset.percentile

    def __len__(self) -> int:
        return len(self.codeset)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HashIndex):
            return NotImplemented
        return self.fingerprint == other.fingerprint and self.codeset == other.codeset

    def __repr__(self) -> str:
        return (
            f"HashIndex(n={len(self)}, code_length={self.code_length}, "
            f"fingerprint={self.fingerprint.hex()[:12]}...)"
        )


def build_index(codeset: CodeSet) -> HashIndex:
    """Freeze a non-empty code set into a queryable index."""
    return HashIndex(codeset)


def query(
    index: HashIndex, code: BinaryCode, k: int = DEFAULT_K, query_id: str = ""
) -> RetrievalResult:
    """Exact top-k nearest references under Hamming distance.

    Full linear scan, never approximate.  k beyond the index size simply
    returns every reference.
    """
    if code.length != index.code_length:
        raise ValueError(
            f"query code length {code.length} does not match "
            f"index code length {index.code_length}"
        )
    _check_k(k)
    dists = np.bitwise_count(index.codeset.words ^ code.words[None, :]).sum(
        axis=1, dtype=np.int64
    )
    order = np.argsort(dists, kind="stable")[:k]
    hits = [Hit(index.ids[i], index.labels[i], int(dists[i])) for i in order]
    return RetrievalResult(query_id, hits)


def batch_query(
    index: HashIndex,
    queries: CodeSet,
    k: int = DEFAULT_K,
    threads: int | None = None,
) -> list[RetrievalResult]:
    """Run query() for every code in `queries`, preserving their order.

    Results are identical whatever the worker count; threads only split
    the query list into contiguous chunks.
    """
    if queries.code_length != index.code_length:
        raise ValueError(
            f"query code length {queries.code_length} does not match "
            f"index code length {index.code_length}"
        )
    _check_k(k)
    n_queries = len(queries)
    if n_queries == 0:
        return []
    workers = resolve_threads(threads)
    if workers <= 1 or n_queries == 1:
        return _scan_range(index, queries, k, 0, n_queries)
    bounds = np.linspace(0, n_queries, min(workers, n_queries) + 1).astype(int)
    spans = list(zip(bounds[:-1], bounds[1:]))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda span: _scan_range(index, queries, k, *span), spans)
        return [result for part in parts for result in part]


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else HASHFIND_THREADS, else 1.

    A value of 0 (argument or environment) means one worker per CPU.
    """
    if threads is None:
        raw = os.environ.get("HASHFIND_THREADS")
        if raw is None:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"HASHFIND_THREADS must be an integer, got {raw!r}") from None
    if threads < 0:
        raise ValueError(f"thread count must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def _scan_range(
    index: HashIndex, queries: CodeSet, k: int, start: int, stop: int
) -> list[RetrievalResult]:
    ref = index.codeset.words
    n, w = ref.shape
    block = max(1, _BLOCK_WORD_BUDGET // (n * w))
    results: list[RetrievalResult] = []
    for lo in range(start, stop, block):
        hi = min(stop, lo + block)
        chunk = queries.words[lo:hi]
        dists = np.bitwise_count(ref[None, :, :] ^ chunk[:, None, :]).sum(
            axis=2, dtype=np.int64
        )
        orders = np.argsort(dists, axis=1, kind="stable")[:, :k]
        for row in range(hi - lo):
            drow = dists[row]
            hits = [Hit(index.ids[j], index.labels[j], int(drow[j])) for j in orders[row]]
            results.append(RetrievalResult(queries.ids[lo + row], hits))
    return results


def serialize_index(index: HashIndex, path: str | Path) -> None:
    """Write the index to disk; deserialize_index() checks the fingerprint."""
    cs = index.codeset
    header = (
        INDEX_MAGIC
        + struct.pack("<II", INDEX_VERSION, cs.code_length)
        + struct.pack("<d", cs.percentile)
        + struct.pack("<Q", len(cs))
    )
    payload = header + index.fingerprint + _entries_blob(cs)
    _atomic_write_bytes(Path(path), payload)


def deserialize_index(path: str | Path) -> HashIndex:
    """Load an index, verifying magic, version, structure, and fingerprint."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 4 or data[:4] != INDEX_MAGIC:
        raise IndexFormatError(f"{path}: bad magic {data[:4]!r}, expected {INDEX_MAGIC!r}")
    if len(data) < 60:
        raise IndexFormatError(f"{path}: truncated header")
    version, length = struct.unpack_from("<II", data, 4)
    if version != INDEX_VERSION:
        raise IndexFormatError(
            f"{path}: unsupported index version {version}, "
            f"this build reads version {INDEX_VERSION}"
        )
    (percentile,) = struct.unpack_from("<d", data, 12)
    (count,) = struct.unpack_from("<Q", data, 20)
    stored = data[28:60]
    if not 1 <= length <= MAX_CODE_LENGTH:
        raise IndexFormatError(f"{path}: code length {length} out of range")
    if percentile != percentile or not 0.0 <= percentile <= 100.0:
        raise IndexFormatError(f"{path}: percentile {percentile} out of range")
    w = (length + 63) // 64
    # each entry needs at least two length prefixes plus the code words
    if count > (len(data) - 60) // (8 + 8 * w):
        raise IndexFormatError(f"{path}: truncated, {count} entries do not fit")
    ids: list[str] = []
    labels: list[str] = []
    words = np.zeros((count, w), dtype=np.uint64)
    offset = 60
    for i in range(count):
        rid, offset = _read_prefixed(data, offset, path)
        label, offset = _read_prefixed(data, offset, path)
        end = offset + 8 * w
        if end > len(data):
            raise IndexFormatError(f"{path}: truncated at entry {i}")
        words[i] = np.frombuffer(data, dtype="<u8", count=w, offset=offset)
        offset = end
        ids.append(rid)
        labels.append(label)
    if offset != len(data):
        raise IndexFormatError(f"{path}: {len(data) - offset} trailing bytes after last entry")
    try:
        codeset = CodeSet(ids, labels, words, length, percentile)
        index = HashIndex(codeset)
    except ValueError as exc:
        raise IndexFormatError(f"{path}: invalid index content: {exc}") from None
    if index.fingerprint != stored:
        raise IndexFormatError(f"{path}: fingerprint mismatch, file corrupted or altered")
    return index


def _fingerprint(codeset: CodeSet) -> bytes:
    digest = hashlib.sha256()
    digest.update(
        struct.pack("<IdQ", codeset.code_length, codeset.percentile, len(codeset))
    )
    digest.update(_entries_blob(codeset))
    return digest.digest()


def _entries_blob(codeset: CodeSet) -> bytes:
    le_words = codeset.words.astype("<u8", copy=False)
    parts: list[bytes] = []
    for i in range(len(codeset)):
        rid = codeset.ids[i].encode("utf-8")
        label = codeset.labels[i].encode("utf-8")
        parts.append(struct.pack("<I", len(rid)))
        parts.append(rid)
        parts.append(struct.pack("<I", len(label)))
        parts.append(label)
        parts.append(le_words[i].tobytes())
    return b"".join(parts)


def _read_prefixed(data: bytes, offset: int, path: Path) -> tuple[str, int]:
    if offset + 4 > len(data):
        raise IndexFormatError(f"{path}: truncated length prefix")
    (n,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if offset + n > len(data):
        raise IndexFormatError(f"{path}: truncated string field")
    try:
        text = data[offset : offset + n].decode("utf-8")
    except UnicodeDecodeError:
        raise IndexFormatError(f"{path}: undecodable string field") from None
    return text, offset + n


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
