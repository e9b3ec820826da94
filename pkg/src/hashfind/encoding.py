"""Per-vector percentile thresholding into packed binary codes."""

from __future__ import annotations

import math

import numpy as np

from hashfind.embeddings import DuplicateIdError, EmbeddingSet

MAX_CODE_LENGTH = 4096

_WORD_BITS = 64


class EncodingError(ValueError):
    """Invalid binarization parameters or malformed code data."""


def _check_percentile(q) -> float:
    q = float(q)
    if math.isnan(q) or not 0.0 <= q <= 100.0:
        raise EncodingError(f"percentile must lie in [0, 100], got {q}")
    return q


def _check_length(length: int) -> int:
    if not 1 <= length <= MAX_CODE_LENGTH:
        raise EncodingError(f"code length must be in [1, {MAX_CODE_LENGTH}], got {length}")
    return length


def _words_for(length: int) -> int:
    return (length + _WORD_BITS - 1) // _WORD_BITS


def _check_vector(vector) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.ndim != 1:
        raise EncodingError(f"expected a 1-D vector, got ndim={vector.ndim}")
    if vector.size == 0:
        raise EncodingError("cannot take a percentile of an empty vector")
    if not np.all(np.isfinite(vector)):
        raise EncodingError("vector contains non-finite components")
    return vector


def _rank_interp(dim: int, q: float) -> tuple[int, int, float]:
    # The fractional rank h = (D-1)*q/100 sits between order statistics
    # floor(h) and floor(h)+1; the threshold interpolates with weight h-floor(h).
    h = (dim - 1) * q / 100.0
    lo = int(math.floor(h))
    hi = min(lo + 1, dim - 1)
    return lo, hi, h - lo


def percentile_threshold(vector, q) -> float:
    """q-th percentile of the vector's own components.

    Linear interpolation between order statistics: with the components
    sorted ascending as x[0] <= ... <= x[D-1], the result is
    x[lo] + frac * (x[lo+1] - x[lo]) where h = (D-1)*q/100, lo = floor(h)
    and frac = h - lo.  At q=50 on an even-length vector this is the
    midpoint of the two middle values, i.e. the median.
    """
    q = _check_percentile(q)
    vector = _check_vector(vector)
    x = np.sort(vector)
    lo, hi, frac = _rank_interp(vector.size, q)
    return float(x[lo] + frac * (x[hi] - x[lo]))


class BinaryCode:
    """Packed L-bit code; bit i lives in word i // 64 at position i % 64."""

    __slots__ = ("length", "words")

    def __init__(self, words, length: int):
        length = _check_length(length)
        words = np.array(words, dtype=np.uint64, copy=True)
        if words.ndim != 1 or words.shape[0] != _words_for(length):
            raise EncodingError(
                f"expected {_words_for(length)} words for length {length}, "
                f"got shape {words.shape}"
            )
        tail = length % _WORD_BITS
        if tail and int(words[-1]) >> tail:
            raise EncodingError("bits beyond the code length must be zero")
        words.flags.writeable = False
        self.words = words
        self.length = length

    @classmethod
    def from_bits(cls, bits) -> "BinaryCode":
        """Pack a 0/1 sequence; bits[i] becomes bit i of the code."""
        bits = np.asarray(bits)
        if bits.ndim != 1 or bits.size == 0:
            raise EncodingError("bits must be a non-empty 1-D sequence")
        if not np.all((bits == 0) | (bits == 1)):
            raise EncodingError("bits must be 0 or 1")
        return cls(_pack_rows(bits.astype(np.uint8)[None, :])[0], bits.size)

    def bits(self) -> np.ndarray:
        """Unpacked 0/1 array of length L, in component order."""
        raw = np.unpackbits(self.words.astype("<u8").view(np.uint8), bitorder="little")
        return raw[: self.length]

    def bit(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(f"bit index {i} out of range for length {self.length}")
        return int(self.words[i // _WORD_BITS]) >> (i % _WORD_BITS) & 1

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self.words, other.words))

    def __hash__(self) -> int:
        return hash((self.length, self.words.tobytes()))

    def __repr__(self) -> str:
        hexwords = ",".join(f"0x{int(w):x}" for w in self.words)
        return f"BinaryCode(length={self.length}, words=[{hexwords}])"


def binarize(vector, q) -> BinaryCode:
    """Threshold one vector: bit i = 1 iff vector[i] >= its q-th percentile.

    The comparison is greater-or-equal, so a constant vector encodes to
    all ones at every percentile, and q=0 always yields all ones.
    """
    vector = _check_vector(vector)
    _check_length(vector.size)
    t = percentile_threshold(vector, q)
    bits = (vector >= t).astype(np.uint8)
    return BinaryCode(_pack_rows(bits[None, :])[0], vector.size)


class CodeSet:
    """Ordered codes with parallel ids and labels, all of one length.

    Insertion order is canonical: downstream ranking breaks distance ties
    by position in this set.
    """

    def __init__(self, ids, labels, words, code_length: int, percentile):
        code_length = _check_length(code_length)
        percentile = _check_percentile(percentile)
        words = np.ascontiguousarray(words, dtype=np.uint64)
        w = _words_for(code_length)
        if words.ndim != 2 or words.shape[1] != w:
            raise EncodingError(f"expected an (n, {w}) word matrix, got shape {words.shape}")
        if not (len(ids) == len(labels) == words.shape[0]):
            raise EncodingError(
                f"parallel lengths differ: {len(ids)} ids, {len(labels)} labels, "
                f"{words.shape[0]} codes"
            )
        seen: set[str] = set()
        for rid in ids:
            if rid in seen:
                raise DuplicateIdError(f"duplicate id {rid!r}")
            seen.add(rid)
        tail = code_length % _WORD_BITS
        if tail and words.shape[0] and int(words[:, -1].max()) >> tail:
            raise EncodingError("bits beyond the code length must be zero")
        self.ids = list(ids)
        self.labels = list(labels)
        self.words = words
        self.code_length = code_length
        self.percentile = percentile

    def code(self, i: int) -> BinaryCode:
        return BinaryCode(self.words[i], self.code_length)

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CodeSet):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.labels == other.labels
            and self.code_length == other.code_length
            and self.percentile == other.percentile
            and bool(np.array_equal(self.words, other.words))
        )

    def __repr__(self) -> str:
        return (
            f"CodeSet(n={len(self)}, code_length={self.code_length}, "
            f"percentile={self.percentile})"
        )


def encode_set(emb_set: EmbeddingSet, q) -> CodeSet:
    """Binarize every record of a set at percentile q, preserving order.

    Pointwise identical to binarize on each record's vector; the batched
    arithmetic below runs the same operations row-wise.
    """
    q = _check_percentile(q)
    if len(emb_set) == 0:
        raise EncodingError("cannot encode an empty embedding set")
    _check_length(emb_set.dim)
    vectors = emb_set.vectors
    x = np.sort(vectors, axis=1)
    lo, hi, frac = _rank_interp(emb_set.dim, q)
    thresholds = x[:, lo] + frac * (x[:, hi] - x[:, lo])
    bits = (vectors >= thresholds[:, None]).astype(np.uint8)
    return CodeSet(emb_set.ids, emb_set.labels, _pack_rows(bits), emb_set.dim, q)


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack rows of 0/1 bytes into little-endian 64-bit words."""
    n, length = bits.shape
    packed = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((n, _words_for(length) * 8), dtype=np.uint8)
    padded[:, : packed.shape[1]] = packed
    return padded.view("<u8").astype(np.uint64, copy=False)
